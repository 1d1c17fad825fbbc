"""Brute-force and coupling verifiers for the deterministic toppling laws.

Every checker works on enumerable instances with recorded instruction stacks,
so the engine's answers can be compared against independent reimplementations:
exhaustive enumeration of legal toppling orders, random acceptable sequences
for the least-action principle, and the street-sweeper coupling replayed step
by step.  Verdicts serialize to JSON.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .configuration import SLEEPING, Configuration
from .engine import State, jump_site, stabilize, visits
from .errors import NodeBudgetError
from .instructions import InstructionSource
from .rng import derive_seed
from .topology import Topology, build_interval

NODE_BUDGET = 10**6

LAMBDAS = (0.5, 1.0, 2.0)


@dataclass
class OracleInstance:
    """A small recorded-stack instance whose toppling tree is enumerable."""

    topo: Topology
    config: Configuration
    odometer: np.ndarray
    lam: float
    seed: int

    @property
    def src(self) -> InstructionSource:
        return InstructionSource(self.topo, self.lam, self.seed)

    def state(self) -> State:
        return State(self.config.copy(), self.odometer.copy())


@dataclass
class Verdict:
    """Aggregate result of a verification suite."""

    instances: int = 0
    passed: int = 0
    skipped: int = 0
    first_failure: str | None = None
    stats: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.first_failure is None

    def record(self, ok: bool, detail: str) -> None:
        self.instances += 1
        if ok:
            self.passed += 1
        elif self.first_failure is None:
            self.first_failure = detail

    def skip(self) -> None:
        self.instances += 1
        self.skipped += 1

    def to_json(self) -> dict:
        out = {
            "instances": self.instances,
            "passed": self.passed,
            "skipped": self.skipped,
            "first_failure": self.first_failure,
        }
        out.update(self.stats)
        return out


def random_instance(
    master_seed: int,
    index: int,
    max_n: int = 6,
    max_particles: int = 6,
    max_offset: int = 4,
) -> OracleInstance:
    """Instance generator: tiny interval, few particles, bounded odometer."""
    rng = np.random.default_rng(derive_seed(master_seed, "instance", index))
    n = int(rng.integers(1, max_n + 1))
    topo = build_interval(n)
    values = np.zeros(n, dtype=np.int64)
    for _ in range(int(rng.integers(0, max_particles + 1))):
        values[int(rng.integers(n))] += 1
    # demote some singleton sites to sleepers
    for i in range(n):
        if values[i] == 1 and rng.random() < 0.3:
            values[i] = SLEEPING
    odometer = rng.integers(0, max_offset + 1, size=n).astype(np.int64)
    lam = LAMBDAS[int(rng.integers(len(LAMBDAS)))]
    seed = int(derive_seed(master_seed, "stack", index))
    return OracleInstance(topo, Configuration(values), odometer, lam, seed)


# ---------------------------------------------------------------------------
# independent toppling rule (deliberately not the engine's implementation)


def _apply_instruction(topo, src, values, odom, i):
    """One toppling at interval index i on tuple-backed state; returns tuples."""
    values = list(values)
    odom = list(odom)
    j = odom[i] + 1
    ins = src.instruction(topo.site(i), j)
    odom[i] = j
    if ins.sleep:
        if values[i] == 1:
            values[i] = SLEEPING
        # a sleeper wakes and re-sleeps; piles of 2+ consume the instruction
    else:
        values[i] = 0 if values[i] == SLEEPING else values[i] - 1
        if ins.exit_side is None:
            d = topo.index(ins.target)
            values[d] = 2 if values[d] == SLEEPING else values[d] + 1
    return tuple(values), tuple(odom)


def enumerate_legal_stabilizations(
    inst: OracleInstance, sites=None, budget: int = NODE_BUDGET
) -> set:
    """All outcomes of maximal legal toppling sequences within the site set.

    Returns the set of distinct (configuration tuple, odometer tuple) pairs;
    the abelian property predicts a singleton.
    """
    topo = inst.topo
    src = inst.src
    n = topo.n
    allowed = (
        [True] * n
        if sites is None
        else [topo.site(i) in set(sites) for i in range(n)]
    )
    start = (tuple(int(v) for v in inst.config.values), tuple(int(v) for v in inst.odometer))
    seen = {start}
    outcomes = set()
    stack = [start]
    while stack:
        values, odom = stack.pop()
        active = [i for i in range(n) if allowed[i] and values[i] >= 1]
        if not active:
            outcomes.add((values, odom))
            continue
        for i in active:
            nxt = _apply_instruction(topo, src, values, odom, i)
            if nxt not in seen:
                if len(seen) >= budget:
                    raise NodeBudgetError(
                        f"legal toppling tree exceeded {budget} nodes"
                    )
                seen.add(nxt)
                stack.append(nxt)
    return outcomes


def _engine_outcome(inst: OracleInstance, sites=None):
    report = stabilize(inst.state(), inst.src, sites=sites)
    return (
        tuple(int(v) for v in report.final.config.values),
        tuple(int(v) for v in report.final.odometer),
    )


def check_abelian(master_seed: int, instances: int, budget: int = NODE_BUDGET) -> Verdict:
    """Enumeration returns a singleton that matches the engine stabilization."""
    verdict = Verdict()
    for idx in range(instances):
        inst = random_instance(master_seed, idx)
        outcomes = enumerate_legal_stabilizations(inst, budget=budget)
        engine = _engine_outcome(inst)
        ok = len(outcomes) == 1 and engine in outcomes
        verdict.record(ok, f"instance {idx}: outcomes={len(outcomes)}, engine match={engine in outcomes}")
    return verdict


# ---------------------------------------------------------------------------
# least-action principle


def check_least_action(
    master_seed: int, instances: int, max_steps: int = 2000
) -> Verdict:
    """Random acceptable sequences dominate the legal stabilizing odometer."""
    verdict = Verdict()
    for idx in range(instances):
        inst = random_instance(master_seed, idx)
        topo, src, n = inst.topo, inst.src, inst.topo.n
        rng = np.random.default_rng(derive_seed(master_seed, "policy", idx))
        values = tuple(int(v) for v in inst.config.values)
        odom = tuple(int(v) for v in inst.odometer)
        illegal_used = False
        steps = 0
        while steps < max_steps:
            active = [i for i in range(n) if values[i] >= 1]
            occupied = [i for i in range(n) if values[i] != 0]
            if not active:
                # stable; optionally poke a sleeper (acceptable, illegal)
                sleepers = [i for i in range(n) if values[i] == SLEEPING]
                if not sleepers or rng.random() < 0.5:
                    break
                i = sleepers[int(rng.integers(len(sleepers)))]
                illegal_used = True
            elif rng.random() < 0.25 and len(occupied) > len(active):
                choices = [i for i in occupied if values[i] == SLEEPING]
                i = choices[int(rng.integers(len(choices)))]
                illegal_used = True
            else:
                i = active[int(rng.integers(len(active)))]
            values, odom = _apply_instruction(topo, src, values, odom, i)
            steps += 1
        if steps >= max_steps:
            verdict.skip()
            continue
        legal = _engine_outcome(inst)
        dominates = all(a >= b for a, b in zip(odom, legal[1]))
        strict = any(a > b for a, b in zip(odom, legal[1]))
        ok = dominates and (strict or odom == legal[1])
        if not illegal_used:
            ok = dominates and odom == legal[1]  # purely legal: equality
        verdict.record(ok, f"instance {idx}: odometer {odom} vs legal {legal[1]}")
    return verdict


# ---------------------------------------------------------------------------
# preemptive activation (equality / strict-domination dichotomy)


def check_preemptive_abelian(master_seed: int, instances: int) -> Verdict:
    """Activating site v commutes with stabilization iff v is visited.

    If v is visited, the activated state stabilizes to the identical
    (configuration, odometer); if not, its odometer strictly dominates.
    Exactly one branch must hold per instance.
    """
    verdict = Verdict()
    for idx in range(instances):
        inst = random_instance(master_seed, idx)
        occupied = [
            inst.topo.site(i)
            for i in range(inst.topo.n)
            if inst.config.values[i] != 0
        ]
        if not occupied:
            verdict.skip()
            continue
        rng = np.random.default_rng(derive_seed(master_seed, "pick", idx))
        v = occupied[int(rng.integers(len(occupied)))]
        src = inst.src
        i = inst.topo.index(v)

        visited = visits(inst.state(), v, src)
        base = stabilize(inst.state(), src)

        activated = inst.state()
        if activated.config.values[i] == SLEEPING:
            activated.config.values[i] = 1
        act = stabilize(activated, src)

        equal = bool(
            np.array_equal(act.final.config.values, base.final.config.values)
            and np.array_equal(act.final.odometer, base.final.odometer)
        )
        dominates = bool(np.all(act.final.odometer >= base.final.odometer))
        strict = dominates and bool(act.final.odometer[i] > base.final.odometer[i])

        if visited:
            ok = equal and not strict
        else:
            ok = strict and not equal
        verdict.record(
            ok,
            f"instance {idx}: v={v} visited={visited} equal={equal} strict={strict}",
        )
    return verdict


# ---------------------------------------------------------------------------
# preemptive jump


def check_preemptive_jump(master_seed: int, instances: int) -> Verdict:
    """Jumping sigma's particles first leaves the stabilization unchanged,
    provided (tau, f) visits supp sigma; instances failing the hypothesis are
    skipped and counted."""
    verdict = Verdict()
    for idx in range(instances):
        rng = np.random.default_rng(derive_seed(master_seed, "jsplit", idx))
        inst = random_instance(master_seed, idx)
        topo, src = inst.topo, inst.src
        n = topo.n

        # split the instance into sigma (may sleep) and all-active tau
        sigma = np.zeros(n, dtype=np.int64)
        tau = np.zeros(n, dtype=np.int64)
        for i in range(n):
            v = int(inst.config.values[i])
            if v == SLEEPING:
                sigma[i] = SLEEPING
            elif v > 0:
                s = int(rng.integers(0, v + 1))
                tau[i] = v - s
                if s:
                    sigma[i] = s

        supp = [i for i in range(n) if sigma[i] != 0]
        # hypothesis: (tau, f) visits supp sigma
        tau_report = stabilize(State(Configuration(tau.copy()), inst.odometer.copy()), src)
        visited_idx = {topo.index(s) for s in tau_report.visited}
        if any(i not in visited_idx for i in supp):
            verdict.skip()
            continue

        combined = Configuration(sigma) + Configuration(tau)
        direct = stabilize(State(combined.copy(), inst.odometer.copy()), src)

        jumped = State(combined.copy(), inst.odometer.copy())
        for i in supp:
            count = 1 if sigma[i] == SLEEPING else int(sigma[i])
            for _ in range(count):
                jumped = jump_site(jumped, topo.site(i), src)
        after = stabilize(jumped, src)

        ok = bool(
            np.array_equal(after.final.config.values, direct.final.config.values)
            and np.array_equal(after.final.odometer, direct.final.odometer)
        )
        verdict.record(ok, f"instance {idx}: jump-first != direct stabilization")
    verdict.stats["skip_rate"] = verdict.skipped / max(verdict.instances, 1)
    return verdict


# ---------------------------------------------------------------------------
# street-sweeper coupling


def _jump_tracked(topo, src, values, odom, i):
    """Jump one particle off interval index i; returns its landing index or -1."""
    while True:
        j = odom[i] + 1
        ins = src.instruction(topo.site(i), j)
        odom[i] = j
        if ins.sleep:
            if values[i] == 1:
                values[i] = SLEEPING
            continue
        values[i] = 0 if values[i] == SLEEPING else values[i] - 1
        if ins.exit_side is not None:
            return -1
        d = topo.index(ins.target)
        values[d] = 2 if values[d] == SLEEPING else values[d] + 1
        return d


def check_street_sweeper(
    sweep: Configuration,
    car: Configuration,
    m: int,
    lam: float,
    reps: int,
    master_seed: int,
    n_cap: int = 512,
) -> Verdict:
    """Replay the sweeper coupling and audit its TV bound.

    Per replicate: activate the sweepers, jump the car particles round by
    round to build (sigma_k, f_k), record the visit events E_k and the
    flush time N, and on the good event assert bit-exact equality of the two
    stabilized configurations.  Aggregates an empirical TV and checks it
    against m * p_hat + P_hat(N >= m) plus three standard errors.
    """
    n = sweep.n
    if car.n != n:
        raise ValueError("sweep and car configurations must share the interval")
    if car.has_sleeping():
        raise ValueError("car configuration must be all-active")
    topo = build_interval(n)
    verdict = Verdict()

    fail_events = 0
    n_tail = 0
    good_fires = 0
    law_a = []
    law_b = []
    for r in range(reps):
        src = InstructionSource(topo, lam, derive_seed(master_seed, "sweep", r))
        sweep_vals = sweep.values.copy()
        sweep_prime = np.where(sweep_vals == SLEEPING, 1, sweep_vals)

        values = sweep_prime + car.values
        odom = np.zeros(n, dtype=np.int64)
        cars = []
        for i in range(n):
            cars.extend([i] * int(car.values[i]))

        f_snapshots = [odom.copy()]
        for _ in range(1, m):
            cars = [
                d
                for pos in cars
                if (d := _jump_tracked(topo, src, values, odom, pos)) >= 0
            ]
            f_snapshots.append(odom.copy())

        # N: keep jumping on a scratch copy until the cars are gone
        big_n = m - 1 if not cars else None
        if big_n is None:
            sv, so, sc = values.copy(), odom.copy(), list(cars)
            k = m - 1
            while sc and k < m + n_cap:
                sc = [
                    d
                    for pos in sc
                    if (d := _jump_tracked(topo, src, sv, so, pos)) >= 0
                ]
                k += 1
            big_n = k
        if big_n >= m:
            n_tail += 1

        events_ok = True
        for f_k in f_snapshots:
            probe = stabilize(State(Configuration(sweep_vals.copy()), f_k.copy()), src)
            if len(probe.visited) != n:
                events_ok = False
                fail_events += 1

        direct = stabilize(
            State(sweep + car, np.zeros(n, dtype=np.int64)), src
        )
        route_b = stabilize(
            State(Configuration(sweep_vals.copy()), f_snapshots[-1].copy()), src
        )
        law_a.append(tuple(int(v) for v in direct.final.config.values))
        law_b.append(tuple(int(v) for v in route_b.final.config.values))

        if events_ok and big_n <= m - 1:
            good_fires += 1
            ok = law_a[-1] == law_b[-1]
            verdict.record(ok, f"replicate {r}: coupling mismatch on good event")
        else:
            verdict.skip()

    p_hat = fail_events / (m * reps)
    q_hat = n_tail / reps
    support = set(law_a) | set(law_b)
    tv = _tuple_tv(law_a, law_b, support)
    se_p = (p_hat * (1 - p_hat) / (m * reps)) ** 0.5
    se_q = (q_hat * (1 - q_hat) / reps) ** 0.5
    se_tv = (len(support) / (4 * reps)) ** 0.5
    slack = 3 * (m * se_p + se_q + se_tv)
    bound = m * p_hat + q_hat + slack
    verdict.stats.update(
        {
            "tv": tv,
            "bound": bound,
            "p_hat": p_hat,
            "n_tail": q_hat,
            "good_fires": good_fires,
        }
    )
    verdict.record(tv <= bound, f"empirical TV {tv:.4f} exceeds bound {bound:.4f}")
    return verdict


def _tuple_tv(sample_a, sample_b, support) -> float:
    na, nb = len(sample_a), len(sample_b)
    ca, cb = {}, {}
    for k in sample_a:
        ca[k] = ca.get(k, 0) + 1
    for k in sample_b:
        cb[k] = cb.get(k, 0) + 1
    return 0.5 * sum(abs(ca.get(k, 0) / na - cb.get(k, 0) / nb) for k in support)


# ---------------------------------------------------------------------------
# exact sampling


def check_exact_sampling(
    n: int,
    lam: float,
    extra: Configuration,
    reps: int,
    master_seed: int,
    tol: float = 0.02,
) -> Verdict:
    """Stab(1_V + extra) and Stab(1_V) agree in law within tol."""
    if extra.has_sleeping():
        raise ValueError("extra configuration must be all-active")
    topo = build_interval(n)
    verdict = Verdict()
    base = Configuration.all_active(n)
    loaded = base + extra
    sample_a = []
    sample_b = []
    for r in range(reps):
        src_a = InstructionSource(topo, lam, derive_seed(master_seed, "loaded", r))
        src_b = InstructionSource(topo, lam, derive_seed(master_seed, "plain", r))
        a = stabilize(State.initial(loaded), src_a).final.config
        b = stabilize(State.initial(base), src_b).final.config
        sample_a.append(tuple(int(v) for v in a.values))
        sample_b.append(tuple(int(v) for v in b.values))
    support = set(sample_a) | set(sample_b)
    tv = _tuple_tv(sample_a, sample_b, support)
    verdict.stats["tv"] = tv
    verdict.record(tv <= tol, f"TV {tv:.4f} exceeds tolerance {tol}")
    return verdict
