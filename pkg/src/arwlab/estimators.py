"""Executable mixing bounds and scaling experiments.

Upper bounds on total variation come from the visit-failure route: for any
m >= 1, TV(t) <= m * P(t driven particles fail to visit all sites) + P(H >= m),
where H is the maximal absorption time of independent simple random walks
started from every site.  Lower bounds come from counting statistics against
exact stationary samples.  For tiny n a direct plug-in TV over all stable
configurations sandwiches both.

All replicate loops use keyed sub-seeds, so every estimate is a pure function
of its (parameters, seed) pair.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.stats import beta as beta_dist

from . import _kernels
from .chain import DrivingSequence, run_chain, sample_stationary
from .configuration import Configuration
from .engine import DEFAULT_CAP, State, stabilize, visits_all
from .errors import (
    DomainError,
    GridTooCoarseError,
    ReplicateBudgetError,
    StateSpaceTooLargeError,
)
from .instructions import InstructionSource
from .rng import derive_seed
from .topology import Topology, build_interval

TAIL_TOL = 1e-15


# ---------------------------------------------------------------------------
# hitting-time tail


@dataclass
class HittingTail:
    """Exact tail P(H >= m) of the all-walkers absorption time on an interval.

    Indexing past the stored horizon returns 0.0; the tail is truncated once
    it falls below TAIL_TOL, which is beyond double-precision relevance.
    """

    n: int
    tail: np.ndarray

    def __getitem__(self, m: int) -> float:
        if m < 0:
            raise DomainError(f"tail index must be >= 0, got {m}")
        if m < self.tail.shape[0]:
            return float(self.tail[m])
        return 0.0

    def __len__(self) -> int:
        return self.tail.shape[0]


def _tail_horizon(n: int) -> int:
    # relaxation time of the absorbing interval walk is ~ 2(n+1)^2 / pi^2;
    # the tail is below TAIL_TOL well before this many steps
    return int(2.0 * (n + 1) ** 2 / math.pi**2 * (math.log(n + 1) + 40.0)) + 16


def hitting_tail(n: int, M: int) -> HittingTail:
    """Exact dynamic program for tail[m] = P(H >= m), m = 0..M."""
    if n < 1:
        raise DomainError(f"interval size must be >= 1, got {n}")
    if M < 1:
        raise DomainError(f"tail horizon must be >= 1, got {M}")
    m_cap = min(M, _tail_horizon(n))
    tail = _kernels.hitting_tail_dp(n, m_cap, TAIL_TOL)
    return HittingTail(n=n, tail=np.asarray(tail))


@lru_cache(maxsize=32)
def _cached_tail(n: int) -> HittingTail:
    return hitting_tail(n, _tail_horizon(n))


def hitting_tail_mc(n: int, m_max: int, runs: int, seed: int) -> np.ndarray:
    """Monte Carlo estimate of tail[m] for m = 0..m_max (cross-check oracle)."""
    hist = _kernels.hitting_histogram(n, m_max, runs, seed % (2**32))
    surv = np.cumsum(hist[::-1])[::-1]  # surv[h] = #runs with H >= h
    return surv[: m_max + 1] / runs


# ---------------------------------------------------------------------------
# binomial confidence intervals (Clopper-Pearson, conservative by design)


def binom_ci(k: int, n: int, alpha: float = 0.05):
    """Exact two-sided binomial confidence interval for k successes in n."""
    if n < 1:
        raise DomainError("binomial CI needs n >= 1")
    lo = 0.0 if k == 0 else float(beta_dist.ppf(alpha / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(beta_dist.ppf(1 - alpha / 2, k + 1, n - k))
    return lo, hi


# ---------------------------------------------------------------------------
# initial-configuration laws


def _placement(kind: str, t: int, topo: Topology, rng) -> Configuration:
    """t active particles placed per the named law on an empty background."""
    n = topo.n
    values = np.zeros(n, dtype=np.int64)
    if t > 0:
        if kind == "central":
            values[(n - 1) // 2] = t
        elif kind == "uniform":
            idx = rng.integers(0, n, size=t)
            np.add.at(values, idx, 1)
        else:
            raise DomainError(f"unknown placement law {kind!r}")
    return Configuration(values)


def visit_failure_prob(
    kind: str,
    t: int,
    topo: Topology,
    lam: float,
    reps: int,
    seed: int,
    cap: int = DEFAULT_CAP,
):
    """Frequency that t driven particles fail to visit every site.

    Returns (p_hat, (lo, hi)) with an exact binomial CI.  kind selects the
    placement law: "central" stacks all t particles on the middle site,
    "uniform" places them independently uniformly at random.
    """
    if reps < 1:
        raise DomainError("reps must be >= 1")
    failures = 0
    for r in range(reps):
        sub = derive_seed(seed, "visit", t, r)
        rng = np.random.default_rng(sub)
        config = _placement(kind, t, topo, rng)
        src = InstructionSource(topo, lam, derive_seed(sub, "stack"))
        ok, _ = visits_all(State.initial(config), src, cap=cap)
        failures += 0 if ok else 1
    p_hat = failures / reps
    return p_hat, binom_ci(failures, reps)


# ---------------------------------------------------------------------------
# TV bounds


@dataclass
class TVBounds:
    """Two-sided TV bounds at one chain step t.

    upper may exceed 1 (it is clamped for display only); lower is always a
    genuine lower bound in [0, 1].
    """

    t: int
    lower: float
    upper: float
    p_hat: float
    p_lo: float
    p_hi: float
    m_star: int


def default_m_grid(n: int):
    """Candidate m values: n, n^2, n^3, and powers of two.

    The bound holds for every m >= 1, so the power-of-two ladder extends past
    n^3 for tiny n, where the tail vanishes long before n^3 is large.
    """
    grid = {n, n**2, n**3}
    m = 1
    while m <= max(n**3, 256):
        grid.add(m)
        m *= 2
    return sorted(grid)


def _upper_from_p(p_hi: float, n: int, m_grid):
    tail = _cached_tail(n)
    best, best_m = math.inf, m_grid[0]
    for m in m_grid:
        val = m * p_hi + tail[m]
        if val < best:
            best, best_m = val, m
    return best, best_m


def tv_upper_bound(
    n: int,
    lam: float,
    t: int,
    driving: str,
    reps: int,
    seed: int,
    m_grid=None,
    cap: int = DEFAULT_CAP,
) -> TVBounds:
    """Visit-failure upper bound: min over m of m * p_hi + P(H >= m).

    Valid for any starting configuration, since adding particles can only
    increase the probability of visiting all sites.  Consumes the upper
    confidence limit of the visit-failure estimate, so the bound stays
    conservative.
    """
    if m_grid is None:
        m_grid = default_m_grid(n)
    if not m_grid:
        raise DomainError("m_grid must be non-empty")
    topo = build_interval(n)
    p_hat, (p_lo, p_hi) = visit_failure_prob(driving, t, topo, lam, reps, seed, cap=cap)
    upper, m_star = _upper_from_p(p_hi, n, sorted(m_grid))
    return TVBounds(
        t=t, lower=0.0, upper=upper, p_hat=p_hat, p_lo=p_lo, p_hi=p_hi, m_star=m_star
    )


def _survival_lower(counts: np.ndarray, k: int) -> float:
    """Conservative lower CI for P(count >= k) from a sample of counts."""
    hits = int(np.count_nonzero(counts >= k))
    return binom_ci(hits, counts.shape[0])[0]


def _survival_upper(counts: np.ndarray, k: int) -> float:
    hits = int(np.count_nonzero(counts >= k))
    return binom_ci(hits, counts.shape[0])[1]


def stationary_count_samples(
    n: int, lam: float, reps: int, seed: int, cap: int = DEFAULT_CAP
) -> np.ndarray:
    """Particle counts of exact stationary samples (shared across estimators)."""
    topo = build_interval(n)
    out = np.empty(reps, dtype=np.int64)
    for r in range(reps):
        out[r] = sample_stationary(topo, lam, derive_seed(seed, "pi", r), cap=cap).count()
    return out


def chain_count_samples(
    n: int,
    lam: float,
    t: int,
    driving: str,
    reps: int,
    seed: int,
    cap: int = DEFAULT_CAP,
) -> np.ndarray:
    """Counts of sigma_t from the empty start over independent chain runs."""
    topo = build_interval(n)
    out = np.empty(reps, dtype=np.int64)
    for r in range(reps):
        drv = _driving_sequence(driving, derive_seed(seed, "drive", r))
        run = run_chain(
            Configuration.empty(n), t, drv, topo, lam, derive_seed(seed, "chain", r), cap=cap
        )
        out[r] = run.final.count()
    return out


def _driving_sequence(driving: str, seed: int) -> DrivingSequence:
    if driving == "central":
        return DrivingSequence.central()
    if driving == "uniform":
        return DrivingSequence.uniform(seed)
    raise DomainError(f"unknown driving kind {driving!r}")


def tv_lower_bound_counting(
    n: int,
    lam: float,
    t: int,
    reps: int,
    seed: int,
    chain_reps: int = 0,
    driving: str = "uniform",
    pi_counts: np.ndarray | None = None,
    chain_counts: np.ndarray | None = None,
    cap: int = DEFAULT_CAP,
) -> float:
    """Counting lower bound on TV(law(sigma_t), pi) from the empty start.

    Always exploits that count(sigma_t) <= t: thresholds k > t give
    lower = CI-adjusted P_pi(count > t) with no chain runs at all.  When
    chain_reps > 0 (or chain_counts is supplied) every threshold k <= t is
    scanned as well, with Clopper-Pearson slack consumed on both sides.
    """
    if pi_counts is None:
        pi_counts = stationary_count_samples(n, lam, reps, seed, cap=cap)
    best = _survival_lower(pi_counts, t + 1)  # k > t channel, chain side is 0 exactly
    if chain_counts is None and chain_reps > 0:
        chain_counts = chain_count_samples(n, lam, t, driving, chain_reps, seed, cap=cap)
    if chain_counts is not None:
        for k in range(0, min(t, n) + 1):
            gap = max(
                _survival_lower(pi_counts, k) - _survival_upper(chain_counts, k),
                _survival_lower(chain_counts, k) - _survival_upper(pi_counts, k),
            )
            if gap > best:
                best = gap
    return max(0.0, min(1.0, best))


# ---------------------------------------------------------------------------
# plug-in TV for tiny n

PLUGIN_MAX_N = 10


def _stable_key(config: Configuration) -> int:
    """Bitmask over sites: bit set iff the site holds a sleeping particle."""
    mask = 0
    for i, v in enumerate(config.values):
        if v == -1:
            mask |= 1 << i
    return mask


def _empirical_tv(keys_a: np.ndarray, keys_b: np.ndarray, cells: int) -> float:
    ha = np.bincount(keys_a, minlength=cells) / keys_a.shape[0]
    hb = np.bincount(keys_b, minlength=cells) / keys_b.shape[0]
    return 0.5 * float(np.abs(ha - hb).sum())


def chain_key_samples(
    n: int,
    lam: float,
    t: int,
    driving: str,
    reps: int,
    seed: int,
    cap: int = DEFAULT_CAP,
) -> np.ndarray:
    """Stable-configuration keys of sigma_t over independent chain runs."""
    topo = build_interval(n)
    out = np.empty(reps, dtype=np.int64)
    for r in range(reps):
        drv = _driving_sequence(driving, derive_seed(seed, "drive", r))
        run = run_chain(
            Configuration.empty(n), t, drv, topo, lam, derive_seed(seed, "chain", r), cap=cap
        )
        out[r] = _stable_key(run.final)
    return out


def stationary_key_samples(
    n: int, lam: float, reps: int, seed: int, cap: int = DEFAULT_CAP
) -> np.ndarray:
    topo = build_interval(n)
    out = np.empty(reps, dtype=np.int64)
    for r in range(reps):
        sample = sample_stationary(topo, lam, derive_seed(seed, "pi", r), cap=cap)
        out[r] = _stable_key(sample)
    return out


def tv_plugin_small_n(
    n: int,
    lam: float,
    t: int,
    driving: str,
    reps: int,
    seed: int,
    boot: int = 200,
    chain_keys: np.ndarray | None = None,
    pi_keys: np.ndarray | None = None,
    cap: int = DEFAULT_CAP,
):
    """Direct empirical TV over the 2^n stable configurations.

    Returns (tv_hat, (lo, hi), bias) where bias is the documented plug-in
    bias scale sqrt(2^n / reps); the bootstrap CI covers sampling noise only.
    """
    if n > PLUGIN_MAX_N:
        raise StateSpaceTooLargeError(
            f"plug-in TV needs 2^n cells; n={n} exceeds the cap {PLUGIN_MAX_N}"
        )
    if chain_keys is None:
        chain_keys = chain_key_samples(n, lam, t, driving, reps, seed, cap=cap)
    if pi_keys is None:
        pi_keys = stationary_key_samples(n, lam, reps, seed, cap=cap)
    cells = 1 << n
    tv_hat = _empirical_tv(chain_keys, pi_keys, cells)
    rng = np.random.default_rng(derive_seed(seed, "boot"))
    stats = np.empty(boot)
    for b in range(boot):
        ra = rng.integers(0, chain_keys.shape[0], size=chain_keys.shape[0])
        rb = rng.integers(0, pi_keys.shape[0], size=pi_keys.shape[0])
        stats[b] = _empirical_tv(chain_keys[ra], pi_keys[rb], cells)
    lo, hi = np.quantile(stats, [0.025, 0.975])
    bias = math.sqrt(cells / min(chain_keys.shape[0], pi_keys.shape[0]))
    return tv_hat, (float(lo), float(hi)), bias


# ---------------------------------------------------------------------------
# sweeps and cutoff location

SWEEP_FIELDS = [
    "n",
    "lambda",
    "t",
    "lower",
    "upper",
    "p_hat",
    "p_lo",
    "p_hi",
    "m_star",
    "plugin",
    "plugin_lo",
    "plugin_hi",
]

CUTOFF_FIELDS = ["n", "t_lo", "t_hi", "rho_hat", "window_over_n"]


def _fmt(x) -> str:
    if x is None or x == "":
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.6g}"


def write_csv(path, fields, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_fmt(row.get(f, "")) for f in fields])


def mixing_sweep(
    n: int,
    lam: float,
    t_grid,
    driving: str,
    reps: int,
    seed: int,
    m_grid=None,
    out=None,
    cap: int = DEFAULT_CAP,
):
    """Evaluate lower/upper TV bounds (plus plug-in TV when n is tiny) on t_grid.

    Stationary samples and chain trajectories are shared across the grid; one
    chain run to max(t_grid) yields every intermediate snapshot.  Returns the
    rows of the sweep CSV as dicts; writes the CSV when out is given.
    """
    t_grid = sorted(set(int(t) for t in t_grid))
    if not t_grid or t_grid[0] < 0:
        raise DomainError("t_grid must contain non-negative steps")
    topo = build_interval(n)
    t_max = t_grid[-1]
    plugin_on = n <= PLUGIN_MAX_N

    pi_counts = np.empty(reps, dtype=np.int64)
    pi_keys = np.empty(reps, dtype=np.int64) if plugin_on else None
    for r in range(reps):
        sample = sample_stationary(topo, lam, derive_seed(seed, "pi", r), cap=cap)
        pi_counts[r] = sample.count()
        if plugin_on:
            pi_keys[r] = _stable_key(sample)

    chain_counts = {t: np.empty(reps, dtype=np.int64) for t in t_grid}
    chain_keys = {t: np.empty(reps, dtype=np.int64) for t in t_grid} if plugin_on else None
    for r in range(reps):
        drv = _driving_sequence(driving, derive_seed(seed, "drive", r))
        run = run_chain(
            Configuration.empty(n), t_max, drv, topo, lam, derive_seed(seed, "chain", r), cap=cap
        )
        for t in t_grid:
            chain_counts[t][r] = run.counts[t]
            if plugin_on:
                chain_keys[t][r] = _stable_key(run.states[t])

    rows = []
    for t in t_grid:
        bounds = tv_upper_bound(n, lam, t, driving, reps, seed, m_grid=m_grid, cap=cap)
        lower = tv_lower_bound_counting(
            n, lam, t, reps, seed, pi_counts=pi_counts, chain_counts=chain_counts[t], cap=cap
        )
        row = {
            "n": n,
            "lambda": lam,
            "t": t,
            "lower": lower,
            "upper": bounds.upper,
            "p_hat": bounds.p_hat,
            "p_lo": bounds.p_lo,
            "p_hi": bounds.p_hi,
            "m_star": bounds.m_star,
            "plugin": "",
            "plugin_lo": "",
            "plugin_hi": "",
        }
        if plugin_on:
            tv_hat, (lo, hi), _ = tv_plugin_small_n(
                n, lam, t, driving, reps, seed, chain_keys=chain_keys[t], pi_keys=pi_keys, cap=cap
            )
            row["plugin"], row["plugin_lo"], row["plugin_hi"] = tv_hat, lo, hi
        rows.append(row)
    if out is not None:
        write_csv(out, SWEEP_FIELDS, rows)
    return rows


def required_upper_reps(n: int, eps: float) -> int:
    """Replicates needed for the visit-failure upper bound to reach eps.

    Even a zero-failure estimate carries the Clopper-Pearson ceiling
    p_hi ~ -ln(alpha/2)/reps, so the bound has a floor of
    min over m of m * 3.69 / reps + tail[m].  Returns the smallest reps for
    which that floor is at most eps.
    """
    tail = _cached_tail(n)
    c = -math.log(0.025)
    best = math.inf
    for m in range(1, len(tail) + 1):
        t = tail[m] if m < len(tail) else 0.0
        if t < eps:
            best = min(best, c * m / (eps - t))
    return int(math.ceil(best))


def locate_cutoff(
    n_grid,
    lam: float,
    eps: float,
    reps,
    seed: int,
    density_reps: int = 400,
    t_hi_fracs=None,
    out=None,
    cap: int = DEFAULT_CAP,
):
    """Bracket the mixing transition per n and report its scaling.

    t_lo(n) is the largest t whose counting lower bound stays >= 1 - eps;
    t_hi(n) is the smallest grid t whose visit-failure upper bound drops to
    <= eps.  reps may be an int or a mapping n -> int for the upper-bound
    replicates.  Raises ReplicateBudgetError when the Monte Carlo CI floor
    provably prevents the upper bound from reaching eps at the given reps,
    and GridTooCoarseError when the t_hi grid fails to bracket the crossing.
    """
    if not 0 < eps < 0.5:
        raise DomainError(f"eps must be in (0, 1/2), got {eps}")
    if t_hi_fracs is None:
        # geometric ladder from rho*n upward; small n cross at large multiples
        t_hi_fracs = []
        f = 1.0
        while f <= 12.0:
            t_hi_fracs.append(f)
            f *= 1.04
    rows = []
    for n in sorted(set(int(v) for v in n_grid)):
        n_reps = reps[n] if isinstance(reps, dict) else int(reps)
        need = required_upper_reps(n, eps)
        if n_reps < need:
            raise ReplicateBudgetError(
                f"n={n}: upper bound cannot reach eps={eps} with reps={n_reps}; "
                f"the zero-failure CI floor needs at least {need} replicates"
            )
        pi_counts = stationary_count_samples(n, lam, density_reps, derive_seed(seed, "rho", n))
        rho_hat = float(pi_counts.mean()) / n

        # t_lo: integer scan of the k > t channel, reusing the same samples
        t_lo = None
        for t in range(n, -1, -1):
            if _survival_lower(pi_counts, t + 1) >= 1 - eps:
                t_lo = t
                break
        if t_lo is None:
            raise GridTooCoarseError(
                f"n={n}: counting lower bound never reaches {1 - eps:.3g}; "
                "increase density_reps"
            )

        # t_hi: binary search over the fraction grid (upper bound is
        # statistically monotone in t)
        t_vals = sorted(set(max(1, int(round(f * rho_hat * n))) for f in t_hi_fracs))
        cache = {}

        def upper_at(t):
            if t not in cache:
                b = tv_upper_bound(n, lam, t, "central", n_reps, derive_seed(seed, "hi", n, t), cap=cap)
                cache[t] = b.upper
            return cache[t]

        lo_i, hi_i = 0, len(t_vals) - 1
        if upper_at(t_vals[hi_i]) > eps:
            raise GridTooCoarseError(
                f"n={n}: upper bound still {cache[t_vals[hi_i]]:.3g} > eps at "
                f"t={t_vals[hi_i]}; extend t_hi_fracs"
            )
        if upper_at(t_vals[0]) <= eps:
            raise GridTooCoarseError(
                f"n={n}: upper bound already <= eps at the smallest grid point "
                f"t={t_vals[0]}; crossing not bracketed"
            )
        while hi_i - lo_i > 1:
            mid = (lo_i + hi_i) // 2
            if upper_at(t_vals[mid]) <= eps:
                hi_i = mid
            else:
                lo_i = mid
        t_hi = t_vals[hi_i]

        rows.append(
            {
                "n": n,
                "t_lo": t_lo,
                "t_hi": t_hi,
                "rho_hat": rho_hat,
                "window_over_n": (t_hi - t_lo) / n,
            }
        )
    if out is not None:
        write_csv(out, CUTOFF_FIELDS, rows)
    return rows


# ---------------------------------------------------------------------------
# exit experiments


def weighted_sum(config: Configuration, side: str) -> int:
    """Position-weighted particle sum: Right uses site labels j, Left n-j+1."""
    if config.has_sleeping():
        raise DomainError("weighted_sum requires an all-active configuration")
    n = config.n
    j = np.arange(1, n + 1, dtype=np.int64)
    if side == "right":
        w = j
    elif side == "left":
        w = n - j + 1
    else:
        raise DomainError(f"side must be 'left' or 'right', got {side!r}")
    return int((w * config.abs_counts()).sum())


@dataclass
class ExitReport:
    frequency: float
    ci: tuple
    weighted_mean: float
    weighted_min: int
    hypothesis_frac: float
    threshold: float


def exit_probability(
    kind: str,
    particles: int,
    side: str,
    topo: Topology,
    lam: float,
    reps: int,
    seed: int,
    rho_hat: float | None = None,
    eps: float = 0.1,
    cap: int = DEFAULT_CAP,
) -> ExitReport:
    """Frequency that stabilization emits a particle from the given side.

    Also reports weighted-sum statistics of the initial configurations and
    the fraction of replicates satisfying the sufficient exit condition
    weighted_sum >= (rho_hat + eps) n^2 / 2 (threshold 0 when rho_hat is
    None, flagging the condition as unevaluated).
    """
    if reps < 1:
        raise DomainError("reps must be >= 1")
    n = topo.n
    threshold = ((rho_hat + eps) * n * n / 2.0) if rho_hat is not None else 0.0
    hits = 0
    hyp = 0
    wsum = np.empty(reps, dtype=np.int64)
    for r in range(reps):
        sub = derive_seed(seed, "exit", r)
        rng = np.random.default_rng(sub)
        config = _placement(kind, particles, topo, rng)
        wsum[r] = weighted_sum(config, side)
        if wsum[r] >= threshold:
            hyp += 1
        src = InstructionSource(topo, lam, derive_seed(sub, "stack"))
        report = stabilize(State.initial(config), src, cap=cap)
        if report.exits.get(side, 0) >= 1:
            hits += 1
    return ExitReport(
        frequency=hits / reps,
        ci=binom_ci(hits, reps),
        weighted_mean=float(wsum.mean()),
        weighted_min=int(wsum.min()),
        hypothesis_frac=hyp / reps,
        threshold=threshold,
    )
