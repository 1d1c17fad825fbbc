"""The sitewise ARW engine: states, operators, stabilization, visits.

Operators follow the sitewise construction: toppling executes the next
instruction on a site's stack and bumps the running odometer; stabilization
legally topples until no active particle remains in the allowed set; jumping
topples a site through its first jump instruction.  All public operators are
functional (they return new states).

Recorded-mode stabilizations on interval topologies with the default drain
policy dispatch to a numba kernel that replays the identical instruction
stacks, so the fast path is bit-for-bit equal to the reference loop.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .configuration import SLEEPING, Configuration, zero_odometer
from .errors import (
    CapExceededError,
    DomainError,
    IllegalJumpError,
    IllegalToppleError,
    SinkToppleError,
)
from .instructions import InstructionSource

DEFAULT_CAP = 10**9

LEGAL = "legal"
ACCEPTABLE = "acceptable"


@dataclass
class State:
    """An ARW state: configuration plus running odometer."""

    config: Configuration
    odometer: np.ndarray

    @classmethod
    def initial(cls, config: Configuration) -> "State":
        return cls(config.copy(), zero_odometer(config.n))

    def copy(self) -> "State":
        return State(self.config.copy(), self.odometer.copy())


@dataclass
class StabilizeReport:
    final: State
    delta_odometer: np.ndarray
    visited: frozenset  # site ids toppled at least once
    exits: dict  # boundary side -> particles absorbed at the sink
    topple_count: int


def _site_index(src: InstructionSource, v) -> int:
    topo = src.topo
    if v == topo.sink:
        raise SinkToppleError("cannot topple the sink")
    if not topo.is_vertex(v):
        raise SinkToppleError(f"{v!r} is not a vertex")
    return topo.index(v)


def _topple_inplace(values, odom, i, src, exits):
    """Execute the next instruction at site index i.

    Returns (legal, slept, dest): dest is the destination index for a jump
    within the graph, else -1.
    """
    if values[i] == 0:
        raise IllegalToppleError(f"no particle at site index {i}")
    legal = values[i] >= 1
    j = odom[i] + 1
    sleep, dest = src.draw(i, j)
    odom[i] = j
    if sleep:
        if values[i] == 1:
            values[i] = SLEEPING
        # sleeping site: wakes and re-sleeps; >= 2 particles: consumed no-op
        return legal, True, -1
    if values[i] == SLEEPING:
        values[i] = 0
    else:
        values[i] -= 1
    if dest < 0:
        exits[-dest - 1] += 1
        return legal, False, -1
    if values[dest] == SLEEPING:
        values[dest] = 2
    else:
        values[dest] += 1
    return legal, False, dest


def topple(state: State, v, src: InstructionSource):
    """Topple site v once.  Returns (new state, legality)."""
    i = _site_index(src, v)
    out = state.copy()
    exits = np.zeros(len(src.topo.sides), dtype=np.int64)
    legal, _, _ = _topple_inplace(out.config.values, out.odometer, i, src, exits)
    return out, (LEGAL if legal else ACCEPTABLE)


def activate(state: State, sites, src: InstructionSource) -> State:
    """Wake any sleeping particles on the given sites; odometer unchanged."""
    out = state.copy()
    values = out.config.values
    for v in sites:
        i = _site_index(src, v)
        if values[i] == SLEEPING:
            values[i] = 1
    return out


def jump_site(state: State, v, src: InstructionSource, cap: int = DEFAULT_CAP) -> State:
    """Acceptably topple v through its first jump instruction."""
    i = _site_index(src, v)
    if state.config.values[i] == 0:
        raise IllegalJumpError(f"no particle to jump at {v!r}")
    out = state.copy()
    exits = np.zeros(len(src.topo.sides), dtype=np.int64)
    for _ in range(cap):
        _, slept, _ = _topple_inplace(out.config.values, out.odometer, i, src, exits)
        if not slept:
            return out
    raise CapExceededError(f"no jump instruction within {cap} topplings at {v!r}")


def jump_all(state: State, src: InstructionSource, cap: int = DEFAULT_CAP) -> State:
    """Jump every particle once, iterating over the original support.

    Particles landing on other support sites are not re-jumped this round;
    the result carries no sleeping particles on moved sites and is
    independent of the iteration order (local abelian property).
    """
    out = state.copy()
    support = state.config.support()
    counts = state.config.abs_counts()
    for i in support:
        v = src.topo.site(i)
        for _ in range(int(counts[i])):
            out = jump_site(out, v, src, cap=cap)
    return out


def stabilize(
    state: State,
    src: InstructionSource,
    sites=None,
    cap: int = DEFAULT_CAP,
    policy: str = "drain",
    policy_rng=None,
) -> StabilizeReport:
    """Legally topple sites in `sites` (default: all) until stable there.

    The outcome is policy-independent by the abelian property; `policy` exists
    so tests can exercise that fact ("drain", "round-robin", or "random").
    """
    topo = src.topo
    n = topo.n
    allowed = np.zeros(n, dtype=bool)
    if sites is None:
        allowed[:] = True
    else:
        for v in sites:
            allowed[_site_index(src, v)] = True

    out = state.copy()
    values = out.config.values
    odom = out.odometer
    start_odom = state.odometer

    if policy == "drain" and src.mode == "recorded" and topo.is_interval:
        exit_left, exit_right, _, status = _kernels.stabilize_interval(
            values, odom, allowed, np.uint64(src.seed), np.uint64(src.sleep_threshold), cap, False
        )
        if status == _kernels.STATUS_CAP:
            raise CapExceededError(f"stabilization exceeded cap={cap}")
        exits_arr = np.array([exit_left, exit_right], dtype=np.int64)
    else:
        exits_arr = _stabilize_python(values, odom, allowed, src, cap, policy, policy_rng)

    delta = odom - start_odom
    visited = frozenset(topo.site(i) for i in np.flatnonzero(delta > 0))
    exits = {side: int(exits_arr[k]) for k, side in enumerate(topo.sides)}
    return StabilizeReport(
        final=out,
        delta_odometer=delta,
        visited=visited,
        exits=exits,
        topple_count=int(delta.sum()),
    )


def _stabilize_python(values, odom, allowed, src, cap, policy, policy_rng):
    n = values.shape[0]
    exits = np.zeros(len(src.topo.sides), dtype=np.int64)
    count = 0

    def guard():
        nonlocal count
        count += 1
        if count > cap:
            raise CapExceededError(f"stabilization exceeded cap={cap}")

    if policy in ("drain", "round-robin"):
        queue = deque(i for i in range(n) if allowed[i] and values[i] >= 1)
        in_queue = np.zeros(n, dtype=bool)
        for i in queue:
            in_queue[i] = True
        while queue:
            v = queue.popleft()
            in_queue[v] = False
            while values[v] >= 1:
                guard()
                _, _, dest = _topple_inplace(values, odom, v, src, exits)
                if (
                    dest >= 0
                    and allowed[dest]
                    and values[dest] >= 1
                    and not in_queue[dest]
                ):
                    queue.append(dest)
                    in_queue[dest] = True
                if policy == "round-robin":
                    break
            if values[v] >= 1 and not in_queue[v]:
                queue.append(v)
                in_queue[v] = True
    elif policy == "random":
        rng = policy_rng if policy_rng is not None else np.random.default_rng(0)
        while True:
            active = [i for i in range(n) if allowed[i] and values[i] >= 1]
            if not active:
                break
            guard()
            v = active[int(rng.integers(len(active)))]
            _topple_inplace(values, odom, v, src, exits)
    else:
        raise DomainError(f"unknown scheduling policy {policy!r}")
    return exits


def visits(state: State, v, src: InstructionSource, cap: int = DEFAULT_CAP) -> bool:
    """True iff stabilizing off v leaves at least one active particle at v."""
    topo = src.topo
    i = _site_index(src, v)
    others = [w for w in topo.vertices if w != v]
    report = stabilize(state, src, sites=others, cap=cap)
    return bool(report.final.config.values[i] >= 1)


def visits_all(state: State, src: InstructionSource, cap: int = DEFAULT_CAP):
    """(True, None) if stabilization topples every site, else (False, first unvisited)."""
    topo = src.topo
    if src.mode == "recorded" and topo.is_interval:
        out = state.copy()
        allowed = np.ones(topo.n, dtype=bool)
        # early stop: once every site has toppled the answer cannot change
        _, _, _, status = _kernels.stabilize_interval(
            out.config.values, out.odometer, allowed, np.uint64(src.seed), np.uint64(src.sleep_threshold), cap, True
        )
        if status == _kernels.STATUS_CAP:
            raise CapExceededError(f"stabilization exceeded cap={cap}")
        if status == _kernels.STATUS_ALL_VISITED:
            return True, None
        delta = out.odometer - state.odometer
        unvisited = np.flatnonzero(delta == 0)
        if unvisited.size == 0:
            return True, None
        return False, topo.site(int(unvisited[0]))
    report = stabilize(state, src, cap=cap)
    for v in topo.vertices:
        if v not in report.visited:
            return False, v
    return True, None


def jump_rounds_to_empty(
    config: Configuration, src: InstructionSource, cap: int = DEFAULT_CAP
) -> int:
    """Minimal number of jump-all rounds flushing every particle to the sink."""
    if config.has_sleeping():
        raise DomainError("jump_rounds_to_empty requires an all-active configuration")
    state = State.initial(config)
    rounds = 0
    while state.config.count() > 0:
        if rounds >= cap:
            raise CapExceededError(f"configuration not empty after cap={cap} rounds")
        state = jump_all(state, src, cap=cap)
        rounds += 1
    return rounds
