import numpy as np
import pytest

from arwlab.errors import AccessibilityError, InvalidSizeError, KernelError
from arwlab.topology import build_general, build_interval


def test_interval_basic():
    topo = build_interval(3)
    assert topo.n == 3
    assert topo.vertices == (1, 2, 3)
    assert topo.sink == "z"
    assert topo.sides == ("left", "right")
    assert topo.is_interval
    assert topo.index(2) == 1
    assert topo.site(2) == 3


def test_interval_rows_are_half_half():
    topo = build_interval(4)
    for i, row in enumerate(topo.rows):
        probs = [p for p, _ in row]
        assert probs == [0.5, 0.5]


def test_interval_boundary_exits():
    topo = build_interval(2)
    dests0 = [d for _, d in topo.rows[0]]
    dests1 = [d for _, d in topo.rows[1]]
    assert any(d < 0 for d in dests0)  # left site can exit
    assert any(d < 0 for d in dests1)  # right site can exit


def test_interval_rejects_bad_size():
    with pytest.raises(InvalidSizeError):
        build_interval(0)


def test_general_matches_interval_shape():
    kernel = {
        "a": {"b": 0.5, "z": 0.5},
        "b": {"a": 0.5, "z": 0.5},
    }
    topo = build_general(["a", "b"], kernel)
    assert topo.n == 2
    assert not topo.is_interval


def test_general_rejects_bad_row_sum():
    with pytest.raises(KernelError):
        build_general(["a"], {"a": {"z": 0.7}})


def test_general_rejects_unknown_target():
    with pytest.raises(KernelError):
        build_general(["a"], {"a": {"ghost": 1.0}})


def test_general_rejects_unreachable_sink():
    kernel = {
        "a": {"b": 1.0},
        "b": {"a": 1.0},
    }
    with pytest.raises(AccessibilityError):
        build_general(["a", "b"], kernel)


def test_site_index_roundtrip():
    topo = build_interval(6)
    for v in topo.vertices:
        assert topo.site(topo.index(v)) == v
