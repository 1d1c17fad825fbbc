"""Particle configurations and odometers.

A configuration assigns each site Empty, Sleeping, or Active(k >= 1); it is
stored as an int64 array with -1 encoding a sleeping particle.  Sleeping
counts as one particle.  JSON serialization uses 0, "s", or k >= 1 and
round-trips exactly.  Odometers are plain nonnegative int64 arrays.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError

SLEEPING = -1


class Configuration:
    __slots__ = ("values",)

    def __init__(self, values):
        arr = np.asarray(values, dtype=np.int64)
        if arr.ndim != 1:
            raise DomainError("configuration must be one-dimensional")
        if (arr < SLEEPING).any():
            raise DomainError("configuration entries must be >= -1")
        self.values = arr

    # -- constructors ------------------------------------------------------

    @classmethod
    def empty(cls, n: int) -> "Configuration":
        return cls(np.zeros(n, dtype=np.int64))

    @classmethod
    def all_active(cls, n: int) -> "Configuration":
        """The configuration 1_V: one active particle at every site."""
        return cls(np.ones(n, dtype=np.int64))

    @classmethod
    def all_sleeping(cls, n: int) -> "Configuration":
        return cls(np.full(n, SLEEPING, dtype=np.int64))

    @classmethod
    def single(cls, n: int, idx: int, k: int = 1) -> "Configuration":
        values = np.zeros(n, dtype=np.int64)
        values[idx] = k
        return cls(values)

    @classmethod
    def from_json(cls, entries) -> "Configuration":
        values = np.zeros(len(entries), dtype=np.int64)
        for i, e in enumerate(entries):
            if e == "s":
                values[i] = SLEEPING
            elif isinstance(e, int) and e >= 0:
                values[i] = e
            else:
                raise DomainError(f"bad configuration entry at {i}: {e!r}")
        return cls(values)

    # -- accessors ---------------------------------------------------------

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def copy(self) -> "Configuration":
        return Configuration(self.values.copy())

    def abs_counts(self) -> np.ndarray:
        """Per-site particle counts |sigma(v)| (sleeping counts as one)."""
        return np.abs(self.values)

    def count(self) -> int:
        """Total number of particles."""
        return int(np.abs(self.values).sum())

    def support(self) -> np.ndarray:
        """Indices of sites holding at least one particle."""
        return np.flatnonzero(self.values != 0)

    def is_stable(self, mask=None) -> bool:
        """No active particles (restricted to `mask` when given)."""
        active = self.values >= 1
        if mask is not None:
            active = active & mask
        return not active.any()

    def has_sleeping(self) -> bool:
        return bool((self.values == SLEEPING).any())

    def key(self) -> bytes:
        return self.values.tobytes()

    # -- algebra -----------------------------------------------------------

    def __add__(self, other: "Configuration") -> "Configuration":
        """Pointwise addition with 0+s=s and s+k = |k|+1 for k >= s."""
        a, b = self.values, other.values
        out = np.empty_like(a)
        for i in range(a.shape[0]):
            out[i] = _add_entry(a[i], b[i])
        return Configuration(out)

    def __eq__(self, other) -> bool:
        return isinstance(other, Configuration) and np.array_equal(
            self.values, other.values
        )

    def __hash__(self):
        return hash(self.values.tobytes())

    def __repr__(self):
        return f"Configuration({self.to_json()})"

    # -- serialization -----------------------------------------------------

    def to_json(self) -> list:
        return ["s" if v == SLEEPING else int(v) for v in self.values]


def _add_entry(x: int, y: int) -> int:
    if x == 0:
        return y
    if y == 0:
        return x
    if x == SLEEPING and y == SLEEPING:
        return 2
    if x == SLEEPING:
        return y + 1
    if y == SLEEPING:
        return x + 1
    return x + y


# -- odometers -------------------------------------------------------------


def zero_odometer(n: int) -> np.ndarray:
    return np.zeros(n, dtype=np.int64)


def dominates(f: np.ndarray, g: np.ndarray) -> bool:
    return bool((f >= g).all())


def strictly_dominates(f: np.ndarray, g: np.ndarray) -> bool:
    return bool((f >= g).all() and (f > g).any())


def odometer_to_json(f: np.ndarray) -> list:
    return [int(x) for x in f]


def odometer_from_json(entries) -> np.ndarray:
    arr = np.asarray(entries, dtype=np.int64)
    if (arr < 0).any():
        raise DomainError("odometer entries must be nonnegative")
    return arr
