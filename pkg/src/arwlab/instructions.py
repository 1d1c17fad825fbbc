"""Instruction stacks.

Each instruction is sleep (probability lambda/(1+lambda)) or a jump whose
destination follows the base chain restricted to non-self moves.  Recorded
mode computes Instr_v(j) as a keyed hash of (seed, site index, j): O(1)
random access, replayable, zero storage.  Ephemeral mode streams draws from a
numpy generator and is only reproducible as a sequence.

Destination selection uses integer thresholds on the hash value so the numba
interval kernel and this reference implementation agree bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InstructionIndexError, SinkToppleError
from .rng import MASK64, prf64
from .topology import Topology

_PSCALE_BITS = 53
_PSCALE = 1 << _PSCALE_BITS


@dataclass(frozen=True)
class Instruction:
    sleep: bool
    target: object = None  # destination site id, or the sink id
    exit_side: str | None = None  # set when target is the sink


class InstructionSource:
    """Deterministic, randomly-indexed instruction stacks for one topology."""

    def __init__(self, topo: Topology, lam: float, seed: int, mode: str = "recorded"):
        if lam <= 0:
            raise DomainError(f"sleep rate must be positive, got {lam}")
        if mode not in ("recorded", "ephemeral"):
            raise DomainError(f"unknown mode {mode!r}")
        self.topo = topo
        self.lam = float(lam)
        self.seed = int(seed) & MASK64
        self.mode = mode
        p_sleep = self.lam / (1.0 + self.lam)
        # Threshold on the raw 64-bit hash: h < T  =>  sleep.
        self.sleep_threshold = min(max(int(p_sleep * 2.0**64), 1), MASK64)
        self._span = (1 << 64) - self.sleep_threshold
        self._tables = [self._build_table(i) for i in range(topo.n)]
        self._rng = (
            np.random.default_rng(self.seed) if mode == "ephemeral" else None
        )

    @property
    def sleep_probability(self) -> float:
        return self.lam / (1.0 + self.lam)

    def _build_table(self, i):
        """Integer cumulative thresholds over non-self destinations."""
        entries = [(p, dest) for p, dest in self.topo.rows[i] if dest != i]
        total = sum(p for p, _ in entries)
        scaled = [round(p / total * _PSCALE) for p, _ in entries]
        scaled[-1] += _PSCALE - sum(scaled)
        thresholds = []
        cum = 0
        for s, (_, dest) in zip(scaled, entries):
            cum += s
            thresholds.append(((self._span * cum) >> _PSCALE_BITS, dest))
        thresholds[-1] = (self._span, thresholds[-1][1])
        return tuple(thresholds)

    # -- engine-internal draws --------------------------------------------

    def raw(self, i: int, j: int) -> int:
        """Raw 64-bit hash for site index i, instruction index j."""
        if self.mode == "recorded":
            return prf64(self.seed, i, j)
        return int(self._rng.integers(0, 1 << 64, dtype=np.uint64))

    def draw(self, i: int, j: int):
        """Decode instruction (sleep_flag, dest_code) at site index i."""
        h = self.raw(i, j)
        T = self.sleep_threshold
        if h < T:
            return True, 0
        r = h - T
        for threshold, dest in self._tables[i]:
            if r < threshold:
                return False, dest
        return False, self._tables[i][-1][1]  # guard against float edge cases

    # -- public, id-based API ---------------------------------------------

    def instruction(self, v, j: int) -> Instruction:
        """The j-th instruction at vertex v (j >= 1)."""
        if not self.topo.is_vertex(v):
            raise SinkToppleError(f"{v!r} is not a non-sink vertex")
        if j < 1:
            raise InstructionIndexError(
                f"instruction index must be >= 1, got {j} (extended odometers unsupported)"
            )
        sleep, dest = self.draw(self.topo.index(v), j)
        if sleep:
            return Instruction(sleep=True)
        if dest < 0:
            return Instruction(
                sleep=False, target=self.topo.sink, exit_side=self.topo.sides[-dest - 1]
            )
        return Instruction(sleep=False, target=self.topo.site(dest))
