import csv
import math

import numpy as np
import pytest

from arwlab.chain import (
    ChainRun,
    DrivingSequence,
    chain_step,
    run_chain,
    sample_stationary,
    stationary_counts,
    stationary_density,
)
from arwlab.configuration import SLEEPING, Configuration
from arwlab.errors import DomainError, InvalidDrivingError
from arwlab.instructions import InstructionSource
from arwlab.topology import build_interval


def test_central_driving_site():
    # central driving means site ceil(n/2) on the 1..n labelling
    for n, expected in ((1, 1), (2, 1), (3, 2), (4, 2), (5, 3), (8, 4)):
        topo = build_interval(n)
        assert DrivingSequence.central().emit(topo, 1) == [expected]


def test_uniform_driving_reproducible():
    topo = build_interval(5)
    a = DrivingSequence.uniform(3).emit(topo, 20)
    b = DrivingSequence.uniform(3).emit(topo, 20)
    assert a == b
    assert set(a) <= set(topo.vertices)


def test_explicit_driving_validates_length():
    topo = build_interval(3)
    with pytest.raises(InvalidDrivingError):
        DrivingSequence.explicit([1, 2]).emit(topo, 3)


def test_chain_step_requires_stable_input():
    topo = build_interval(2)
    src = InstructionSource(topo, 1.0, 1)
    with pytest.raises(DomainError):
        chain_step(Configuration.all_active(2), 1, src)


def test_chain_step_produces_stable_output():
    topo = build_interval(3)
    src = InstructionSource(topo, 1.0, 4)
    config, report = chain_step(Configuration.empty(3), 2, src)
    assert config.is_stable()
    assert config.count() + sum(report.exits.values()) == 1


def test_chain_step_into_sleeping_site():
    topo = build_interval(1)
    src = InstructionSource(topo, 1.0, 8)
    sleeping = Configuration(np.array([SLEEPING], dtype=np.int64))
    config, report = chain_step(sleeping, 1, src)
    # the sleeper plus the injected particle make two active particles
    assert config.is_stable()
    assert config.count() + sum(report.exits.values()) == 2


def test_run_chain_counts_bounded_by_t():
    topo = build_interval(6)
    run = run_chain(Configuration.empty(6), 10, DrivingSequence.central(), topo, 1.0, 5)
    assert len(run.states) == 11
    for t, count in enumerate(run.counts):
        assert count <= t


def test_run_chain_t0_identity():
    topo = build_interval(4)
    start = Configuration(np.array([0, SLEEPING, 0, SLEEPING], dtype=np.int64))
    run = run_chain(start, 0, DrivingSequence.central(), topo, 1.0, 7)
    assert list(run.final.values) == list(start.values)


def test_run_chain_stabilizes_unstable_start():
    topo = build_interval(3)
    run = run_chain(Configuration.all_active(3), 0, DrivingSequence.central(), topo, 1.0, 2)
    assert run.final.is_stable()
    assert run.counts[0] + sum(run.exits[0].values()) == 3


def test_one_site_chain_matches_hand_law():
    # on n=1 the stable state after any step is Sleeping w.p. lambda/(1+lambda)
    topo = build_interval(1)
    lam = 1.0
    hits = 0
    reps = 4000
    for r in range(reps):
        run = run_chain(
            Configuration.empty(1), 1, DrivingSequence.central(), topo, lam, 1000 + r
        )
        hits += run.final.count()
    p = lam / (1 + lam)
    se = math.sqrt(p * (1 - p) / reps)
    assert abs(hits / reps - p) < 4 * se


def test_chain_csv_roundtrip(tmp_path):
    topo = build_interval(4)
    run = run_chain(Configuration.empty(4), 5, DrivingSequence.uniform(2), topo, 1.0, 3)
    path = tmp_path / "chain.csv"
    run.to_csv(path, include_config=True)
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6
    assert int(rows[0]["count"]) == 0
    assert int(rows[5]["count"]) == run.final.count()


def test_stationary_sample_is_stable_and_seeded():
    topo = build_interval(8)
    a = sample_stationary(topo, 1.0, 99)
    b = sample_stationary(topo, 1.0, 99)
    assert list(a.values) == list(b.values)
    assert a.is_stable()


def test_stationary_density_ci_and_bounds():
    topo = build_interval(16)
    mean, (lo, hi), reps = stationary_density(topo, 1.0, 60, 11)
    assert reps == 60
    assert 0 <= lo <= mean <= hi <= 1.0 + 1e-12
    assert 0.4 < mean < 1.0  # far from degenerate at lambda=1


def test_stationary_counts_shape():
    topo = build_interval(4)
    counts = stationary_counts(topo, 1.0, 25, 3)
    assert counts.shape == (25,)
    assert np.all((0 <= counts) & (counts <= 4))
