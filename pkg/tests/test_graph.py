from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from syncreg.graph import (
    Digraph,
    SwitchingSchedule,
    adjacency_matrix,
    augment_schedule,
    augment_with_leader,
    constant_schedule,
    cycling_schedule,
    has_spanning_tree,
    laplacian,
    random_schedule,
    spanning_tree_roots,
    union_graph,
    verify_bounded_interconnectivity,
)

# The ring partition of three nodes, 0-based: 0->1, 1->2, 2->0.
RING_PARTS = [Digraph(3, [(0, 1)]), Digraph(3, [(1, 2)]), Digraph(3, [(2, 0)])]
RING = Digraph(3, [(0, 1), (1, 2), (2, 0)])


def bfs_has_root(n, edges):
    """Reachability oracle written against a plain edge list."""
    for root in range(n):
        seen = {root}
        queue = deque([root])
        while queue:
            v = queue.popleft()
            for a, b in edges:
                if a == v and b not in seen:
                    seen.add(b)
                    queue.append(b)
        if len(seen) == n:
            return True
    return False


@st.composite
def digraphs(draw, max_nodes=6):
    n = draw(st.integers(1, max_nodes))
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    weights = [draw(st.integers(1, 5)) for _ in chosen]
    return Digraph(n, [(i, j, w) for (i, j), w in zip(chosen, weights)])


class TestDigraph:
    def test_rejects_self_loop(self):
        with pytest.raises(ValueError, match="self-loop"):
            Digraph(2, [(1, 1)])

    def test_rejects_nonpositive_weight(self):
        with pytest.raises(ValueError, match="non-positive"):
            Digraph(2, [(0, 1, 0.0)])

    def test_rejects_out_of_range_node(self):
        with pytest.raises(ValueError):
            Digraph(2, [(0, 2)])

    def test_default_weight_is_one(self):
        assert Digraph(2, [(0, 1)]).edges[(0, 1)] == 1.0

    def test_equality_and_hash(self):
        assert Digraph(3, [(0, 1)]) == Digraph(3, {(0, 1): 1.0})
        assert len({Digraph(3, [(0, 1)]), Digraph(3, [(0, 1, 1.0)])}) == 1


class TestAdjacencyLaplacian:
    def test_single_node(self):
        np.testing.assert_array_equal(adjacency_matrix(Digraph(1)), [[0.0]])

    def test_convention(self):
        # Edge 1 -> 2 (labels 1-based) lands in row 2, column 1.
        a = adjacency_matrix(Digraph(3, [(0, 1)]))
        expected = np.zeros((3, 3))
        expected[1, 0] = 1.0
        np.testing.assert_array_equal(a, expected)

    def test_two_node_weighted(self):
        a = adjacency_matrix(Digraph(2, [(0, 1, 2.0), (1, 0, 3.0)]))
        np.testing.assert_array_equal(a, [[0.0, 3.0], [2.0, 0.0]])

    def test_empty_laplacian(self):
        np.testing.assert_array_equal(laplacian(Digraph(3)), np.zeros((3, 3)))

    def test_bidirectional_pair(self):
        np.testing.assert_array_equal(laplacian(Digraph(2, [(0, 1), (1, 0)])), [[1, -1], [-1, 1]])

    def test_directed_ring(self):
        L = laplacian(RING)
        np.testing.assert_array_equal(L.sum(axis=1), 0.0)
        np.testing.assert_array_equal(np.diag(L), 1.0)
        np.testing.assert_array_equal(L, [[1, 0, -1], [-1, 1, 0], [0, -1, 1]])

    @given(digraphs())
    def test_rows_sum_to_zero_and_offdiag_is_minus_adjacency(self, g):
        L, A = laplacian(g), adjacency_matrix(g)
        assert np.all(L.sum(axis=1) == 0.0)
        off = ~np.eye(g.n_nodes, dtype=bool)
        np.testing.assert_array_equal(L[off], -A[off])


class TestUnion:
    def test_idempotent(self):
        assert union_graph([RING, RING]) == RING

    def test_ring_partition(self):
        assert union_graph(RING_PARTS) == RING

    def test_empty_graphs(self):
        assert union_graph([Digraph(3), Digraph(3)]) == Digraph(3)

    def test_no_graphs(self):
        with pytest.raises(ValueError, match="no graphs"):
            union_graph([])

    def test_repeated_edge_keeps_max_weight(self):
        u = union_graph([Digraph(2, [(0, 1, 2.0)]), Digraph(2, [(0, 1, 5.0)])])
        assert u.edges[(0, 1)] == 5.0

    @given(digraphs(), st.data())
    def test_spanning_tree_monotone_under_edge_addition(self, g, data):
        extra = data.draw(digraphs(max_nodes=g.n_nodes).filter(lambda h: h.n_nodes == g.n_nodes))
        if has_spanning_tree(g):
            assert has_spanning_tree(union_graph([g, extra]))


class TestSpanningTree:
    def test_single_node(self):
        assert has_spanning_tree(Digraph(1))

    def test_single_edge_three_nodes(self):
        assert not has_spanning_tree(Digraph(3, [(0, 1)]))

    def test_ring(self):
        assert has_spanning_tree(RING) == bfs_has_root(3, list(RING.edges)) is True

    def test_roots_of_path(self):
        assert spanning_tree_roots(Digraph(3, [(0, 1), (1, 2)])) == {0}

    @settings(max_examples=200)
    @given(digraphs())
    def test_matches_bfs_oracle(self, g):
        assert has_spanning_tree(g) == bfs_has_root(g.n_nodes, list(g.edges))


class TestSchedule:
    def test_dwell_violation(self):
        with pytest.raises(ValueError, match="dwell"):
            SwitchingSchedule(RING_PARTS, [0.0, 0.1], [0, 1], 0.25, 1.0)

    def test_index_range(self):
        with pytest.raises(ValueError, match="outside"):
            SwitchingSchedule(RING_PARTS, [0.0], [3], 0.25, 1.0)

    def test_mixed_node_counts(self):
        with pytest.raises(ValueError, match="n_nodes"):
            SwitchingSchedule([Digraph(2), Digraph(3)], [0.0, 0.5], [0, 1], 0.25, 1.0)

    def test_must_start_at_zero(self):
        with pytest.raises(ValueError):
            SwitchingSchedule(RING_PARTS, [0.1], [0], 0.25, 1.0)

    def test_index_at_is_right_continuous(self):
        s = cycling_schedule(RING_PARTS, 0.25, 1.0)
        assert [s.index_at(t) for t in (0.0, 0.2499, 0.25, 0.5, 0.75, 1.0)] == [0, 0, 1, 2, 0, 0]

    def test_segments(self):
        s = cycling_schedule(RING_PARTS, 0.25, 1.0)
        segs = s.segments(0.1, 0.6)
        assert [k for k, _ in segs] == [0, 1, 2]
        np.testing.assert_allclose([d for _, d in segs], [0.15, 0.25, 0.1])

    def test_random_schedule_is_seeded(self):
        a = random_schedule(RING_PARTS, 0.25, 10.0, 5)
        b = random_schedule(RING_PARTS, 0.25, 10.0, 5)
        assert a.indices == b.indices and len(a.indices) == 40


class TestBoundedInterconnectivity:
    def test_cycling_ring_partition(self):
        s = cycling_schedule(RING_PARTS, 0.25, 3.0)
        assert verify_bounded_interconnectivity(s, 0.75, 0.0, 3.0)

    def test_constant_single_edge(self):
        s = constant_schedule(Digraph(3, [(0, 1)]), 3.0, dwell=0.25)
        assert not verify_bounded_interconnectivity(s, 0.75, 0.0, 3.0)

    def test_window_shorter_than_dwell(self):
        s = cycling_schedule(RING_PARTS, 0.25, 3.0)
        assert not verify_bounded_interconnectivity(s, 0.2, 0.0, 3.0)

    def test_two_dwell_windows_fail_for_unaligned_start(self):
        # [0.25, 0.75] only sees G2, G3 (a path 2->3->1: still a tree).
        s = cycling_schedule(RING_PARTS, 0.25, 3.0)
        assert verify_bounded_interconnectivity(s, 0.5, 0.25, 3.0)

    def test_no_complete_window(self):
        s = cycling_schedule(RING_PARTS, 0.25, 1.0)
        with pytest.raises(ValueError):
            verify_bounded_interconnectivity(s, 2.0, 0.0, 1.0)

    @pytest.mark.parametrize("T", [0.25, 0.5, 1.0, 2.5])
    def test_constant_spanning_tree_graph(self, T):
        s = constant_schedule(RING, 5.0, dwell=0.25)
        assert verify_bounded_interconnectivity(s, T, 0.0, 5.0)


class TestLeader:
    def test_leader_reaches_empty_base(self):
        aug = augment_with_leader(Digraph(3), [(0, 1), (0, 2), (0, 3)])
        assert spanning_tree_roots(aug.as_digraph()) == {0}

    def test_no_leader_edges(self):
        aug = augment_with_leader(RING, [])
        assert not has_spanning_tree(aug.as_digraph())

    def test_path_with_leader(self):
        aug = augment_with_leader(Digraph(3, [(0, 1), (1, 2)]), [(0, 1)])
        d = aug.as_digraph()
        assert spanning_tree_roots(d) == {0}
        assert bfs_has_root(4, list(d.edges))

    def test_in_edge_to_leader_rejected(self):
        with pytest.raises(ValueError, match="leader has no in-edges"):
            augment_with_leader(RING, [(1, 0)])

    def test_edge_must_start_at_leader(self):
        with pytest.raises(ValueError):
            augment_with_leader(RING, [(1, 2)])

    @given(digraphs(max_nodes=5), st.data())
    def test_any_spanning_tree_is_rooted_at_leader(self, g, data):
        targets = data.draw(st.sets(st.integers(1, g.n_nodes)))
        d = augment_with_leader(g, [(0, k) for k in targets]).as_digraph()
        roots = spanning_tree_roots(d)
        assert roots <= {0}

    def test_augment_schedule(self):
        s = augment_schedule(cycling_schedule(RING_PARTS, 0.25, 1.0), [(0, 1, 2.0)])
        assert s.n_nodes == 4
        assert all(g.edges[(0, 1)] == 2.0 for g in s.graphs)
        assert verify_bounded_interconnectivity(s, 0.75, 0.0, 0.75)
