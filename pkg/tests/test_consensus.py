import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from syncreg.consensus import (
    check_sync_condition,
    consensus_rate_over_horizon,
    contraction_rate,
    estimate_lyapunov_exponent,
    matrix_exponential,
    transition_matrix,
    window_contraction_rates,
)
from syncreg.errors import DivergenceError
from syncreg.graph import (
    Digraph,
    SwitchingSchedule,
    constant_schedule,
    cycling_schedule,
    laplacian,
    random_schedule,
    union_graph,
    has_spanning_tree,
)

L2 = np.array([[1.0, -1.0], [-1.0, 1.0]])
RING_PARTS = [Digraph(3, [(0, 1)]), Digraph(3, [(1, 2)]), Digraph(3, [(2, 0)])]


def mp_expm(m):
    """High-precision reference exponential."""
    with mpmath.workdps(40):
        return np.array(mpmath.expm(mpmath.matrix(m.tolist())).tolist(), dtype=float)


def sweep_contraction(phi, n_angles=20000):
    """Brute-force max of |phi.T x| / |x| over x orthogonal to ones, for 3x3 phi."""
    u = np.array([1.0, -1.0, 0.0]) / math.sqrt(2)
    v = np.array([1.0, 1.0, -2.0]) / math.sqrt(6)
    theta = np.linspace(0, np.pi, n_angles)
    xs = np.outer(np.cos(theta), u) + np.outer(np.sin(theta), v)
    return np.max(np.linalg.norm(xs @ phi, axis=1))


@st.composite
def random_graph_schedules(draw):
    n = draw(st.integers(2, 4))
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    graphs = [
        Digraph(n, draw(st.lists(st.sampled_from(pairs), unique=True, max_size=4)))
        for _ in range(draw(st.integers(1, 3)))
    ]
    n_int = draw(st.integers(1, 6))
    idx = draw(st.lists(st.integers(0, len(graphs) - 1), min_size=n_int, max_size=n_int))
    return SwitchingSchedule(graphs, [0.25 * k for k in range(n_int)], idx, 0.25, 0.25 * n_int)


class TestMatrixExponential:
    def test_zero(self):
        np.testing.assert_array_equal(matrix_exponential(np.zeros((3, 3))), np.eye(3))

    def test_diagonal(self):
        np.testing.assert_allclose(matrix_exponential(np.diag([-1.0, -2.0])), np.diag(np.exp([-1.0, -2.0])), rtol=1e-14)

    def test_two_node_laplacian_closed_form(self):
        e = math.exp(-2.0)
        expected = 0.5 * np.array([[1 + e, 1 - e], [1 - e, 1 + e]])
        got = matrix_exponential(-L2)
        np.testing.assert_allclose(got, expected, rtol=1e-12)
        np.testing.assert_allclose(got, [[0.5677, 0.4323], [0.4323, 0.5677]], atol=1e-4)

    def test_non_square(self):
        with pytest.raises(ValueError):
            matrix_exponential(np.zeros((2, 3)))

    @pytest.mark.parametrize("seed", range(8))
    def test_against_mpmath_norm_up_to_10(self, seed):
        rng = np.random.default_rng(seed)
        m = rng.normal(size=(4, 4))
        m *= (1 + 9 * rng.random()) / np.linalg.norm(m, 2)
        ref = mp_expm(m)
        err = np.linalg.norm(matrix_exponential(m) - ref) / np.linalg.norm(ref)
        assert err <= 1e-10

    def test_symmetric_eigendecomposition_oracle(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=(5, 5))
        m = -(a + a.T)
        lam, v = np.linalg.eigh(m)
        ref = v @ np.diag(np.exp(lam)) @ v.T
        assert np.linalg.norm(matrix_exponential(m) - ref) / np.linalg.norm(ref) <= 1e-10


class TestTransitionMatrix:
    def test_identity_for_empty_interval(self):
        s = cycling_schedule(RING_PARTS, 0.25, 1.0)
        np.testing.assert_array_equal(transition_matrix(s, 0.3, 0.3).matrix, np.eye(3))

    def test_single_interval(self):
        g = Digraph(2, [(0, 1), (1, 0)])
        phi = transition_matrix(constant_schedule(g, 1.0), 0.0, 0.4).matrix
        np.testing.assert_allclose(phi, mp_expm(-L2 * 0.4), rtol=1e-13)

    def test_two_intervals_newest_leftmost(self):
        s = cycling_schedule(RING_PARTS, 0.25, 1.0)
        phi = transition_matrix(s, 0.1, 0.4).matrix
        ref = mp_expm(-laplacian(RING_PARTS[1]) * 0.15) @ mp_expm(-laplacian(RING_PARTS[0]) * 0.15)
        np.testing.assert_allclose(phi, ref, atol=1e-14)
        other_order = mp_expm(-laplacian(RING_PARTS[0]) * 0.15) @ mp_expm(-laplacian(RING_PARTS[1]) * 0.15)
        assert not np.allclose(phi, other_order)

    def test_reversed_times(self):
        s = cycling_schedule(RING_PARTS, 0.25, 1.0)
        with pytest.raises(ValueError):
            transition_matrix(s, 0.5, 0.2)

    @settings(max_examples=60, deadline=None)
    @given(random_graph_schedules(), st.floats(0, 1), st.floats(0, 1))
    def test_row_stochastic(self, s, a, b):
        t1, t2 = sorted((a * s.horizon, b * s.horizon))
        phi = transition_matrix(s, t1, t2)
        assert phi.is_row_stochastic(1e-9)
        np.testing.assert_allclose(phi.matrix @ np.ones(s.n_nodes), 1.0, atol=1e-9)

    @settings(max_examples=60, deadline=None)
    @given(random_graph_schedules(), st.lists(st.floats(0, 1), min_size=3, max_size=3))
    def test_semigroup(self, s, fr):
        t1, t2, t3 = sorted(f * s.horizon for f in fr)
        lhs = transition_matrix(s, t1, t3).matrix
        rhs = transition_matrix(s, t2, t3).matrix @ transition_matrix(s, t1, t2).matrix
        np.testing.assert_allclose(lhs, rhs, atol=1e-9)


class TestContractionRate:
    def test_identity(self):
        assert contraction_rate(np.eye(3)) == pytest.approx(1.0, abs=1e-12)

    def test_averaging(self):
        assert contraction_rate(np.full((4, 4), 0.25)) == pytest.approx(0.0, abs=1e-12)

    def test_two_node_closed_form(self):
        assert abs(contraction_rate(mp_expm(-0.25 * L2)) - math.exp(-0.5)) <= 1e-9

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force_sweep(self, seed):
        s = random_schedule(RING_PARTS, 0.25, 2.0, seed)
        phi = transition_matrix(s, 0.0, 2.0).matrix
        assert contraction_rate(phi) == pytest.approx(sweep_contraction(phi), rel=1e-6)

    def test_unbalanced_disconnected_can_exceed_one(self):
        phi = mp_expm(-laplacian(Digraph(3, [(0, 1)])) * 5.0)
        assert contraction_rate(phi) > 1.0
        assert contraction_rate(phi) == pytest.approx(sweep_contraction(phi), rel=1e-6)

    @settings(max_examples=60, deadline=None)
    @given(random_graph_schedules(), random_graph_schedules())
    def test_submultiplicative(self, s1, s2):
        if s1.n_nodes != s2.n_nodes:
            return
        p1 = transition_matrix(s1, 0.0, s1.horizon).matrix
        p2 = transition_matrix(s2, 0.0, s2.horizon).matrix
        assert contraction_rate(p1 @ p2) <= contraction_rate(p1) * contraction_rate(p2) + 1e-12

    @settings(max_examples=60, deadline=None)
    @given(random_graph_schedules())
    def test_spanning_tree_window_contracts(self, s):
        if has_spanning_tree(union_graph(s.graphs_active(0.0, s.horizon))):
            assert contraction_rate(transition_matrix(s, 0.0, s.horizon)) < 1.0


class TestConsensusRate:
    @pytest.mark.parametrize("N,T", [(2, 0.25), (3, 0.5), (4, 0.3)])
    def test_complete_graph(self, N, T):
        g = Digraph(N, [(i, j) for i in range(N) for j in range(N) if i != j])
        s = constant_schedule(g, 5 * T)
        # L = N I - 11^T has eigenvalue N on the complement of ones.
        assert consensus_rate_over_horizon(s, T, 0.0, 5) == pytest.approx(math.exp(-N * T), rel=1e-10)

    @pytest.mark.parametrize("g", [Digraph(3), Digraph(3, [(0, 1), (1, 0)])])
    def test_balanced_disconnected_is_one(self, g):
        s = constant_schedule(g, 3.0, dwell=0.25)
        assert abs(consensus_rate_over_horizon(s, 0.75, 0.0, 4) - 1.0) <= 1e-9

    def test_single_window(self):
        s = random_schedule(RING_PARTS, 0.25, 3.0, 1)
        assert consensus_rate_over_horizon(s, 1.0, 0.5, 1) == contraction_rate(transition_matrix(s, 0.5, 1.5))

    def test_is_max_of_windows(self):
        s = random_schedule(RING_PARTS, 0.25, 6.0, 2)
        rates = window_contraction_rates(s, 1.0, 0.0, 6)
        assert consensus_rate_over_horizon(s, 1.0, 0.0, 6) == max(rates)

    def test_schedule_too_short(self):
        s = cycling_schedule(RING_PARTS, 0.25, 1.0)
        with pytest.raises(ValueError, match="covers"):
            consensus_rate_over_horizon(s, 0.75, 0.0, 2)

    def test_cycling_ring_windows_below_one(self):
        s = cycling_schedule(RING_PARTS, 0.25, 7.5)
        assert max(window_contraction_rates(s, 0.75, 0.0, 10)) < 1 - 1e-6


class TestLyapunov:
    def test_rotation(self):
        S = np.array([[0.0, 10.0], [-10.0, 0.0]])
        assert abs(estimate_lyapunov_exponent(lambda w: S @ w, [0.5, 0.5], 20.0)) <= 1e-3

    def test_linear_contraction(self):
        assert abs(estimate_lyapunov_exponent(lambda w: -w, [0.5, 0.5], 20.0) + 1.0) <= 1e-3

    def test_dominant_mode(self):
        D = np.diag([-1.0, -2.0])
        assert abs(estimate_lyapunov_exponent(lambda w: D @ w, [0.5, 0.5], 40.0) + 1.0) <= 1e-3

    @pytest.mark.parametrize("seed", range(4))
    def test_normal_linear_fields(self, seed):
        rng = np.random.default_rng(seed)
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        # Unit spectral gap so the transient is negligible after the discard window.
        lam = np.array([-2.0, -1.0, 0.0]) + rng.uniform(-0.5, 0.5)
        S = q @ np.diag(lam) @ q.T
        nu = estimate_lyapunov_exponent(lambda w: S @ w, [0.3, -0.2, 0.1], 30.0, direction=[1.0, 2.0, 3.0])
        assert abs(nu - lam.max()) <= 1e-2

    def test_diverging_flow(self):
        with pytest.raises(DivergenceError, match="flow diverged"):
            estimate_lyapunov_exponent(lambda w: 2.0 * w, [1.0], 20.0, bound=1e3)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            estimate_lyapunov_exponent(lambda w: -w, [1.0], 0.0)
        with pytest.raises(ValueError):
            estimate_lyapunov_exponent(lambda w: -w, [1.0], 1.0, delta0=0.0)


class TestSyncCondition:
    def test_satisfied(self):
        assert check_sync_condition(0.0, 0.9, 1.0).satisfied

    def test_boundary_is_not_satisfied(self):
        assert not check_sync_condition(0.0, 1.0, 1.0).satisfied

    def test_arithmetic(self):
        assert check_sync_condition(0.2, 0.5, 1.0).satisfied
        assert not check_sync_condition(0.8, 0.5, 1.0).satisfied

    def test_certificate_invariant(self):
        c = check_sync_condition(0.1, 0.3, 2.0)
        assert c.satisfied == (c.nu_max + math.log(c.alpha_star) / c.T < 0)
        assert c.margin == pytest.approx(0.1 + math.log(0.3) / 2.0)

    def test_nonpositive_alpha(self):
        with pytest.raises(ValueError):
            check_sync_condition(0.0, 0.0, 1.0)
