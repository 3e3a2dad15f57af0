"""Weighted digraphs, switching schedules and leader augmentation.

Nodes are 0-based indices. An edge ``(i, j)`` is a channel from node ``i``
(parent) to node ``j`` (child), so node ``j`` listens to node ``i`` and the
adjacency entry ``A[j, i]`` carries the weight.
"""

from __future__ import annotations

import bisect
from collections import deque
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np
from numpy.typing import NDArray

__all__ = [
    "Digraph",
    "SwitchingSchedule",
    "LeaderAugmentedGraph",
    "adjacency_matrix",
    "laplacian",
    "union_graph",
    "spanning_tree_roots",
    "has_spanning_tree",
    "verify_bounded_interconnectivity",
    "augment_with_leader",
    "augment_schedule",
    "cycling_schedule",
    "constant_schedule",
    "random_schedule",
]

# Tolerance when comparing switching instants against each other and the grid.
TIME_TOL = 1e-9


def _normalize_edges(edges) -> dict[tuple[int, int], float]:
    if isinstance(edges, Mapping):
        items = [(tuple(k), v) for k, v in edges.items()]
    else:
        items = []
        for e in edges:
            if len(e) == 2:
                items.append(((e[0], e[1]), 1.0))
            elif len(e) == 3:
                items.append(((e[0], e[1]), e[2]))
            else:
                raise ValueError(f"edge must be (i, j) or (i, j, weight), got {e!r}")
    out: dict[tuple[int, int], float] = {}
    for (i, j), w in items:
        out[(int(i), int(j))] = float(w)
    return out


@dataclass(frozen=True, eq=False)
class Digraph:
    """Weighted directed graph on nodes ``0..n_nodes-1``.

    ``edges`` may be given as a mapping ``{(i, j): weight}`` or as an iterable
    of ``(i, j)`` / ``(i, j, weight)`` tuples; unweighted edges get weight 1.
    """

    n_nodes: int
    edges: Mapping[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        if int(self.n_nodes) < 1:
            raise ValueError("a digraph needs at least one node")
        object.__setattr__(self, "n_nodes", int(self.n_nodes))
        edges = _normalize_edges(self.edges)
        for (i, j), w in edges.items():
            if not (0 <= i < self.n_nodes and 0 <= j < self.n_nodes):
                raise ValueError(f"edge ({i}, {j}) references a node outside 0..{self.n_nodes - 1}")
            if i == j:
                raise ValueError(f"self-loop on node {i}")
            if not (w > 0 and np.isfinite(w)):
                raise ValueError(f"edge ({i}, {j}) has non-positive weight {w}")
        object.__setattr__(self, "edges", MappingProxyType(edges))

    def __eq__(self, other):
        if not isinstance(other, Digraph):
            return NotImplemented
        return self.n_nodes == other.n_nodes and dict(self.edges) == dict(other.edges)

    def __hash__(self):
        return hash((self.n_nodes, frozenset(self.edges.items())))

    def __repr__(self):
        return f"Digraph(n_nodes={self.n_nodes}, edges={dict(self.edges)!r})"

    def children(self, i: int) -> list[int]:
        return [j for (a, j) in self.edges if a == i]


def adjacency_matrix(g: Digraph) -> NDArray[np.float64]:
    """In-neighbour adjacency: ``A[j, i]`` is the weight of edge ``(i, j)``."""
    a = np.zeros((g.n_nodes, g.n_nodes))
    for (i, j), w in g.edges.items():
        a[j, i] = w
    return a


def laplacian(g: Digraph) -> NDArray[np.float64]:
    """``L = D - A`` with ``D`` the diagonal of row sums of ``A``."""
    a = adjacency_matrix(g)
    return np.diag(a.sum(axis=1)) - a


def union_graph(graphs: Sequence[Digraph]) -> Digraph:
    """Union of edge sets; a repeated edge keeps its largest weight."""
    graphs = list(graphs)
    if not graphs:
        raise ValueError("no graphs")
    n = graphs[0].n_nodes
    edges: dict[tuple[int, int], float] = {}
    for g in graphs:
        if g.n_nodes != n:
            raise ValueError("graphs in a union must share n_nodes")
        for e, w in g.edges.items():
            edges[e] = max(w, edges.get(e, 0.0))
    return Digraph(n, edges)


def _reachable(g: Digraph, root: int) -> set[int]:
    seen = {root}
    queue = deque([root])
    adj: dict[int, list[int]] = {}
    for i, j in g.edges:
        adj.setdefault(i, []).append(j)
    while queue:
        v = queue.popleft()
        for u in adj.get(v, ()):
            if u not in seen:
                seen.add(u)
                queue.append(u)
    return seen


def spanning_tree_roots(g: Digraph) -> set[int]:
    """Nodes with a directed path to every other node."""
    return {r for r in range(g.n_nodes) if len(_reachable(g, r)) == g.n_nodes}


def has_spanning_tree(g: Digraph) -> bool:
    return bool(spanning_tree_roots(g))


@dataclass(frozen=True, eq=False)
class SwitchingSchedule:
    """Piecewise-constant graph signal.

    Interval ``k`` starts at ``switch_times[k]`` and uses
    ``graphs[indices[k]]`` until the next start (or ``horizon``). Indices are
    0-based. Consecutive starts must be at least ``dwell_time`` apart; the
    final interval may be cut short by ``horizon``.
    """

    graphs: tuple[Digraph, ...]
    switch_times: tuple[float, ...]
    indices: tuple[int, ...]
    dwell_time: float
    horizon: float

    def __post_init__(self):
        graphs = tuple(self.graphs)
        times = tuple(float(t) for t in self.switch_times)
        idx = tuple(int(k) for k in self.indices)
        object.__setattr__(self, "graphs", graphs)
        object.__setattr__(self, "switch_times", times)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "dwell_time", float(self.dwell_time))
        object.__setattr__(self, "horizon", float(self.horizon))
        if not graphs:
            raise ValueError("schedule needs at least one graph")
        if len({g.n_nodes for g in graphs}) != 1:
            raise ValueError("all graphs in a schedule must share n_nodes")
        if not self.dwell_time > 0:
            raise ValueError("dwell_time must be positive")
        if not times or len(times) != len(idx):
            raise ValueError("switch_times and indices must be non-empty and equally long")
        if abs(times[0]) > TIME_TOL:
            raise ValueError("the first interval must start at t = 0")
        for a, b in zip(times, times[1:]):
            if b - a < self.dwell_time - TIME_TOL:
                raise ValueError(
                    f"switching instants {a} and {b} are closer than the dwell time {self.dwell_time}"
                )
        for k in idx:
            if not 0 <= k < len(graphs):
                raise ValueError(f"graph index {k} outside 0..{len(graphs) - 1}")
        if self.horizon <= times[-1] + TIME_TOL:
            raise ValueError("horizon must lie after the last switching instant")

    @property
    def n_nodes(self) -> int:
        return self.graphs[0].n_nodes

    def interval_at(self, t: float) -> int:
        """Interval number active at ``t`` (right-continuous; ``t = horizon`` maps to the last)."""
        if t < -TIME_TOL or t > self.horizon + TIME_TOL:
            raise ValueError(f"time {t} outside schedule [0, {self.horizon}]")
        return max(bisect.bisect_right(self.switch_times, t + TIME_TOL) - 1, 0)

    def index_at(self, t: float) -> int:
        return self.indices[self.interval_at(t)]

    def graph_at(self, t: float) -> Digraph:
        return self.graphs[self.index_at(t)]

    def segments(self, t1: float, t2: float) -> list[tuple[int, float]]:
        """``(graph_index, duration)`` pieces covering ``[t1, t2)`` in time order."""
        if t2 < t1:
            raise ValueError("t2 must not precede t1")
        if t1 < -TIME_TOL or t2 > self.horizon + TIME_TOL:
            raise ValueError(f"window [{t1}, {t2}] not covered by schedule [0, {self.horizon}]")
        out = []
        bounds = list(self.switch_times[1:]) + [self.horizon]
        for start, end, k in zip(self.switch_times, bounds, self.indices):
            lo, hi = max(start, t1), min(end, t2)
            if hi - lo > TIME_TOL:
                out.append((k, hi - lo))
        return out

    def graphs_active(self, t1: float, t2: float) -> list[Digraph]:
        return [self.graphs[k] for k, _ in self.segments(t1, t2)]


def verify_bounded_interconnectivity(
    s: SwitchingSchedule, T: float, t_start: float = 0.0, horizon: float | None = None
) -> bool:
    """Check that each complete window ``[t_start + (k-1)T, t_start + kT]`` has a spanning-tree union.

    Only graphs active on a sub-interval of positive length count towards a
    window's union.
    """
    if not T > 0:
        raise ValueError("window length T must be positive")
    horizon = s.horizon if horizon is None else min(horizon, s.horizon)
    n_windows = int(np.floor((horizon - t_start) / T + TIME_TOL))
    if n_windows < 1:
        raise ValueError("no complete window fits inside the horizon")
    for k in range(n_windows):
        lo = t_start + k * T
        if not has_spanning_tree(union_graph(s.graphs_active(lo, lo + T))):
            return False
    return True


@dataclass(frozen=True, eq=False)
class LeaderAugmentedGraph:
    """Follower graph plus edges from a leader node.

    In the augmented numbering the leader is node 0 and follower ``i`` of
    ``base`` becomes node ``i + 1``. ``leader_edges`` maps augmented child
    labels (``1..N``) to weights.
    """

    base: Digraph
    leader_edges: Mapping[int, float]

    def __post_init__(self):
        edges = {int(k): float(v) for k, v in dict(self.leader_edges).items()}
        for k, w in edges.items():
            if not 1 <= k <= self.base.n_nodes:
                raise ValueError(f"leader edge target {k} outside 1..{self.base.n_nodes}")
            if not w > 0:
                raise ValueError(f"leader edge (0, {k}) has non-positive weight {w}")
        object.__setattr__(self, "leader_edges", MappingProxyType(edges))

    @property
    def n_followers(self) -> int:
        return self.base.n_nodes

    def as_digraph(self) -> Digraph:
        edges = {(i + 1, j + 1): w for (i, j), w in self.base.edges.items()}
        edges.update({(0, k): w for k, w in self.leader_edges.items()})
        return Digraph(self.base.n_nodes + 1, edges)


def augment_with_leader(g: Digraph, leader_edges) -> LeaderAugmentedGraph:
    """Attach leader node 0 to ``g``.

    ``leader_edges`` holds augmented-label edges ``(0, i)`` or ``(0, i, w)``
    (or a mapping ``{(0, i): w}``); followers ``1..N`` map to ``g``'s nodes
    ``0..N-1``.
    """
    targets: dict[int, float] = {}
    for (i, j), w in _normalize_edges(leader_edges).items():
        if j == 0:
            raise ValueError("leader has no in-edges")
        if i != 0:
            raise ValueError(f"leader edge ({i}, {j}) must originate at node 0")
        targets[j] = w
    return LeaderAugmentedGraph(g, targets)


def augment_schedule(s: SwitchingSchedule, leader_edges) -> SwitchingSchedule:
    """Same switching signal over leader-augmented graphs (leader edges present in every mode)."""
    graphs = tuple(augment_with_leader(g, leader_edges).as_digraph() for g in s.graphs)
    return SwitchingSchedule(graphs, s.switch_times, s.indices, s.dwell_time, s.horizon)


def _regular_times(dwell: float, horizon: float) -> list[float]:
    n = int(np.ceil(horizon / dwell - TIME_TOL))
    return [k * dwell for k in range(n)]


def cycling_schedule(graphs: Sequence[Digraph], dwell: float, horizon: float) -> SwitchingSchedule:
    """Visit ``graphs`` in order, one per dwell interval, repeating."""
    times = _regular_times(dwell, horizon)
    return SwitchingSchedule(tuple(graphs), times, [k % len(graphs) for k in range(len(times))], dwell, horizon)


def constant_schedule(g: Digraph, horizon: float, dwell: float | None = None) -> SwitchingSchedule:
    return SwitchingSchedule((g,), (0.0,), (0,), horizon if dwell is None else dwell, horizon)


def random_schedule(
    graphs: Sequence[Digraph], dwell: float, horizon: float, rng: np.random.Generator | int | None
) -> SwitchingSchedule:
    """Draw a graph index uniformly per dwell interval."""
    rng = np.random.default_rng(rng)
    times = _regular_times(dwell, horizon)
    idx = rng.integers(0, len(graphs), size=len(times))
    return SwitchingSchedule(tuple(graphs), times, idx.tolist(), dwell, horizon)

