"""Topologies: a finite vertex set, an absorbing sink, and a base chain.

The base chain is stored row-by-row as (probability, destination-code) pairs,
where nonnegative codes are vertex indices and negative codes identify sink
channels (boundary sides), so exit accounting can distinguish which way a
particle left the graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import AccessibilityError, InvalidSizeError, KernelError

ROW_SUM_TOL = 1e-12


def side_code(side_idx: int) -> int:
    return -(side_idx + 1)


@dataclass(frozen=True)
class Topology:
    """Vertex set plus sink with per-vertex transition rows.

    `rows[i]` is a tuple of (prob, dest) with dest either a vertex index or a
    negative sink-channel code; `sides` labels the channels.  The sink is
    absorbing by construction: no row ever topples it.
    """

    vertices: tuple
    sink: object
    sides: tuple
    rows: tuple
    is_interval: bool = False
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(
            self, "_index", {v: i for i, v in enumerate(self.vertices)}
        )

    @property
    def n(self) -> int:
        return len(self.vertices)

    def index(self, v) -> int:
        return self._index[v]

    def site(self, i: int):
        return self.vertices[i]

    def is_vertex(self, v) -> bool:
        return v in self._index


def build_interval(n: int) -> Topology:
    """Interval 1..n with both outer boundary vertices merged into one sink.

    Each site jumps left or right with probability 1/2; exits through site 1
    are labeled "left" and through site n "right".  n=1 sends both jump
    destinations to the sink.
    """
    if not isinstance(n, (int,)) or n < 1:
        raise InvalidSizeError(f"interval size must be a positive integer, got {n!r}")
    rows = []
    for i in range(n):
        left = i - 1 if i > 0 else side_code(0)
        right = i + 1 if i < n - 1 else side_code(1)
        rows.append(((0.5, left), (0.5, right)))
    return Topology(
        vertices=tuple(range(1, n + 1)),
        sink="z",
        sides=("left", "right"),
        rows=tuple(rows),
        is_interval=True,
    )


def build_general(vertices, kernel, sink="z") -> Topology:
    """Validated topology from an explicit kernel.

    `kernel` maps each vertex to a dict of {target: probability} where targets
    are vertices or the sink id.  Rows must sum to 1 within 1e-12; all
    vertices must be mutually accessible and the sink reachable from every
    vertex.  Self-loops are allowed in the kernel but are never followed by
    jump instructions (the instruction law conditions on leaving the site).
    """
    vertices = tuple(vertices)
    if len(vertices) == 0:
        raise InvalidSizeError("vertex set is empty")
    if sink in vertices:
        raise KernelError("sink id collides with a vertex id")
    if len(set(vertices)) != len(vertices):
        raise KernelError("duplicate vertex ids")
    index = {v: i for i, v in enumerate(vertices)}

    rows = []
    for v in vertices:
        try:
            row = kernel[v]
        except KeyError:
            raise KernelError(f"no kernel row for vertex {v!r}") from None
        total = 0.0
        entries = []
        for target, p in row.items():
            if p < 0:
                raise KernelError(f"negative probability Q({v!r},{target!r})={p}")
            total += p
            if p == 0:
                continue
            if target == sink:
                entries.append((p, side_code(0)))
            elif target in index:
                entries.append((p, index[target]))
            else:
                raise KernelError(f"unknown target {target!r} in row of {v!r}")
        if abs(total - 1.0) > ROW_SUM_TOL:
            raise KernelError(f"row of {v!r} sums to {total}, expected 1")
        if all(dest == index[v] for _, dest in entries):
            raise KernelError(f"vertex {v!r} has no exit moves (only a self-loop)")
        rows.append(tuple(entries))

    topo = Topology(
        vertices=vertices, sink=sink, sides=("sink",), rows=tuple(rows)
    )
    _check_accessibility(topo)
    return topo


def _check_accessibility(topo: Topology) -> None:
    n = topo.n
    fwd = [set() for _ in range(n)]
    rev = [set() for _ in range(n)]
    sink_adjacent = set()
    for i, row in enumerate(topo.rows):
        for _, dest in row:
            if dest < 0:
                sink_adjacent.add(i)
            elif dest != i:
                fwd[i].add(dest)
                rev[dest].add(i)

    def reach(start, adj):
        seen = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return seen

    fwd_seen = reach(0, fwd)
    rev_seen = reach(0, rev)
    if len(fwd_seen) < n or len(rev_seen) < n:
        raise AccessibilityError("vertices are not mutually accessible")
    if not sink_adjacent:
        raise AccessibilityError("sink is unreachable")
