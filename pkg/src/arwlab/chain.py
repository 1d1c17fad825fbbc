"""The driven-dissipative Markov chain and the exact stationary sampler.

Each chain step adds one active particle at the driven site and stabilizes.
Every step uses a fresh instruction stream keyed by (seed, step), equivalent
in law to continuing partially-consumed stacks.  Exact samples from the
stationary distribution come from stabilizing the all-active configuration.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .configuration import Configuration
from .engine import DEFAULT_CAP, State, StabilizeReport, stabilize
from .errors import DomainError, InvalidDrivingError
from .instructions import InstructionSource
from .rng import derive_seed
from .topology import Topology


@dataclass(frozen=True)
class DrivingSequence:
    """Where particles are injected: uniform random, central, or explicit."""

    kind: str
    seed: int | None = None
    sites: tuple = ()

    @classmethod
    def uniform(cls, seed: int) -> "DrivingSequence":
        return cls(kind="uniform", seed=seed)

    @classmethod
    def central(cls) -> "DrivingSequence":
        return cls(kind="central")

    @classmethod
    def explicit(cls, sites) -> "DrivingSequence":
        return cls(kind="explicit", sites=tuple(sites))

    def emit(self, topo: Topology, t: int) -> list:
        """Driving sites for steps 1..t (independent of instruction streams)."""
        if self.kind == "central":
            center = topo.vertices[(topo.n - 1) // 2]  # site ceil(n/2) on 1..n
            return [center] * t
        if self.kind == "uniform":
            rng = np.random.default_rng(self.seed)
            return [topo.vertices[i] for i in rng.integers(0, topo.n, size=t)]
        if self.kind == "explicit":
            if len(self.sites) < t:
                raise InvalidDrivingError(
                    f"explicit driving sequence has {len(self.sites)} sites, need {t}"
                )
            return list(self.sites[:t])
        raise InvalidDrivingError(f"unknown driving kind {self.kind!r}")


@dataclass
class ChainRun:
    """Trajectory of stable configurations with per-step exit accounting."""

    states: list = field(default_factory=list)  # stable Configurations, index = t
    exits: list = field(default_factory=list)  # per-step dict side -> count
    counts: list = field(default_factory=list)  # per-step particle counts

    @property
    def final(self) -> Configuration:
        return self.states[-1]

    def to_csv(self, path, include_config: bool = False) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["t", "count", "exits_left", "exits_right"]
            if include_config:
                header.append("config")
            writer.writerow(header)
            for t, config in enumerate(self.states):
                ex = self.exits[t]
                row = [
                    t,
                    self.counts[t],
                    ex.get("left", ex.get("sink", 0)),
                    ex.get("right", 0),
                ]
                if include_config:
                    row.append(json.dumps(config.to_json()))
                writer.writerow(row)


def chain_step(
    config: Configuration,
    u,
    src: InstructionSource,
    cap: int = DEFAULT_CAP,
):
    """One driven-dissipative step: add an active particle at u, stabilize.

    Returns (new stable configuration, StabilizeReport).
    """
    topo = src.topo
    if not topo.is_vertex(u):
        raise InvalidDrivingError(f"driving site {u!r} is not a vertex")
    if not config.is_stable():
        raise DomainError("chain_step requires a stable configuration")
    values = config.values.copy()
    i = topo.index(u)
    values[i] = 2 if values[i] == -1 else values[i] + 1
    report = stabilize(State.initial(Configuration(values)), src, cap=cap)
    return report.final.config, report


def run_chain(
    sigma0: Configuration,
    t: int,
    driving: DrivingSequence,
    topo: Topology,
    lam: float,
    seed: int,
    cap: int = DEFAULT_CAP,
) -> ChainRun:
    """Run the chain for t steps from sigma0 (stabilized first if unstable)."""
    if t < 0:
        raise DomainError(f"step count must be >= 0, got {t}")
    run = ChainRun()
    config = sigma0
    if not config.is_stable():
        src0 = InstructionSource(topo, lam, derive_seed(seed, "chain-step", 0))
        report = stabilize(State.initial(config), src0, cap=cap)
        config = report.final.config
        step0_exits = report.exits
    else:
        step0_exits = {side: 0 for side in topo.sides}
    run.states.append(config)
    run.exits.append(step0_exits)
    run.counts.append(config.count())

    for step, u in enumerate(driving.emit(topo, t), start=1):
        src = InstructionSource(topo, lam, derive_seed(seed, "chain-step", step))
        config, report = chain_step(config, u, src, cap=cap)
        run.states.append(config)
        run.exits.append(report.exits)
        run.counts.append(config.count())
    return run


def sample_stationary(
    topo: Topology, lam: float, seed: int, cap: int = DEFAULT_CAP
) -> Configuration:
    """One exact sample from the stationary distribution: stabilize 1_V."""
    src = InstructionSource(topo, lam, seed)
    report = stabilize(State.initial(Configuration.all_active(topo.n)), src, cap=cap)
    return report.final.config


def stationary_counts(
    topo: Topology, lam: float, reps: int, seed: int, cap: int = DEFAULT_CAP
) -> np.ndarray:
    """Particle counts of `reps` independent exact stationary samples."""
    counts = np.empty(reps, dtype=np.int64)
    for r in range(reps):
        sample = sample_stationary(topo, lam, derive_seed(seed, "stationary", r), cap=cap)
        counts[r] = sample.count()
    return counts


def stationary_density(
    topo: Topology, lam: float, reps: int, seed: int, cap: int = DEFAULT_CAP
):
    """Mean stationary density with a 95% normal-approximation CI.

    Returns (mean, (lo, hi), sample_size).
    """
    if reps < 1:
        raise DomainError("reps must be >= 1")
    densities = stationary_counts(topo, lam, reps, seed, cap=cap) / topo.n
    mean = float(densities.mean())
    half = 1.96 * float(densities.std(ddof=1)) / math.sqrt(reps) if reps > 1 else 0.0
    return mean, (mean - half, mean + half), reps
