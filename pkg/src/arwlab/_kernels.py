"""Numba kernels for the interval fast path.

The instruction hash here reimplements `rng.prf64` on uint64 arithmetic, so a
recorded-mode stabilization on an interval gives bit-identical results whether
it runs through these kernels or the pure-Python reference engine (the test
suite asserts this).
"""

from __future__ import annotations

import numba as nb
import numpy as np

U64 = np.uint64

_GOLD1 = U64(0x9E3779B97F4A7C15)
_GOLD2 = U64(0xC2B2AE3D27D4EB4F)
_MIX1 = U64(0xBF58476D1CE4E5B9)
_MIX2 = U64(0x94D049BB133111EB)

STATUS_OK = 0
STATUS_CAP = 1
STATUS_ALL_VISITED = 2


@nb.njit(nb.uint64(nb.uint64), cache=True, inline="always")
def _mix64(x):
    x = (x ^ (x >> U64(30))) * _MIX1
    x = (x ^ (x >> U64(27))) * _MIX2
    return x ^ (x >> U64(31))


@nb.njit(nb.uint64(nb.uint64, nb.uint64, nb.uint64), cache=True, inline="always")
def _prf64(seed, a, b):
    x = _mix64(seed ^ (a * _GOLD1))
    return _mix64(x ^ (b * _GOLD2))


@nb.njit(cache=True, nogil=True)
def stabilize_interval(values, odom, allowed, seed, sleep_threshold, cap, stop_all_visited):
    """Legally topple allowed interval sites until stable there.

    values: int64[n] with -1 sleeping / 0 empty / k active, updated in place.
    odom: int64[n] running odometer, updated in place.
    allowed: bool[n] sites that may topple.
    Returns (exit_left, exit_right, topples, status).
    """
    n = values.shape[0]
    seed = U64(seed)
    T = U64(sleep_threshold)
    span = U64(0) - T
    half = span // U64(2)

    n_allowed = 0
    for i in range(n):
        if allowed[i]:
            n_allowed += 1

    qsize = n + 1
    queue = np.empty(qsize, np.int64)
    in_queue = np.zeros(n, np.bool_)
    head = 0
    tail = 0
    for i in range(n):
        if allowed[i] and values[i] >= 1:
            queue[tail] = i
            tail += 1
            in_queue[i] = True

    visited = np.zeros(n, np.bool_)
    n_visited = 0
    exit_left = 0
    exit_right = 0
    topples = 0

    while head != tail:
        v = queue[head]
        head += 1
        if head == qsize:
            head = 0
        in_queue[v] = False
        while values[v] >= 1:
            topples += 1
            if topples > cap:
                return exit_left, exit_right, topples, STATUS_CAP
            j = odom[v] + 1
            odom[v] = j
            if not visited[v]:
                visited[v] = True
                n_visited += 1
                if stop_all_visited and n_visited == n_allowed:
                    return exit_left, exit_right, topples, STATUS_ALL_VISITED
            h = _prf64(seed, U64(v), U64(j))
            if h < T:
                if values[v] == 1:
                    values[v] = -1
                # >= 2 particles: sleep instruction is a consumed no-op
            else:
                values[v] -= 1
                if (h - T) < half:  # jump left
                    if v == 0:
                        exit_left += 1
                    else:
                        w = v - 1
                        if values[w] == -1:
                            values[w] = 2
                        else:
                            values[w] += 1
                        if values[w] >= 1 and allowed[w] and not in_queue[w]:
                            queue[tail] = w
                            tail += 1
                            if tail == qsize:
                                tail = 0
                            in_queue[w] = True
                else:  # jump right
                    if v == n - 1:
                        exit_right += 1
                    else:
                        w = v + 1
                        if values[w] == -1:
                            values[w] = 2
                        else:
                            values[w] += 1
                        if values[w] >= 1 and allowed[w] and not in_queue[w]:
                            queue[tail] = w
                            tail += 1
                            if tail == qsize:
                                tail = 0
                            in_queue[w] = True

    return exit_left, exit_right, topples, STATUS_OK


@nb.njit(cache=True, nogil=True)
def hitting_histogram(n, m_max, runs, seed):
    """Monte Carlo histogram of H = max absorption step of n interval walkers.

    Returns hist where hist[h] counts runs with H == h, with H clipped to
    m_max + 1 (the overflow bin).
    """
    np.random.seed(seed)
    hist = np.zeros(m_max + 2, np.int64)
    for _ in range(runs):
        h_run = 0
        for start in range(n):
            pos = start
            t = 0
            while 0 <= pos < n and t <= m_max:
                if np.random.random() < 0.5:
                    pos -= 1
                else:
                    pos += 1
                t += 1
            if t > h_run:
                h_run = t
        if h_run > m_max + 1:
            h_run = m_max + 1
        hist[h_run] += 1
    return hist

@nb.njit(cache=True, nogil=True)
def hitting_tail_dp(n, m_max, tol):
    """Exact tail P(H >= m) for m = 0..m_max via the survival recursion.

    u[v] tracks the survival probability of the walker started at interval
    index v; the recursion averages the two neighbours with absorbing
    boundaries.  Stops early once the tail drops below tol and returns the
    truncated vector.
    """
    u = np.ones(n, np.float64)
    tail = np.empty(m_max + 1, np.float64)
    tail[0] = 1.0
    for m in range(1, m_max + 1):
        prod = 1.0
        for v in range(n):
            prod *= 1.0 - u[v]
        t = 1.0 - prod
        tail[m] = t
        if t < tol:
            return tail[: m + 1]
        nu = np.empty(n, np.float64)
        for v in range(n):
            left = u[v - 1] if v > 0 else 0.0
            right = u[v + 1] if v < n - 1 else 0.0
            nu[v] = 0.5 * (left + right)
        u = nu
    return tail
