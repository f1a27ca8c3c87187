import math

import numpy as np
import pytest

from gdbound.errors import DomainError, InvariantError, StructuralError
from gdbound.graphdep import bipartite_ranking_graph
from gdbound.lfrc import (
    LinearClassSpec,
    SubRootHandle,
    estimate_lfrc,
    fixed_point,
    second_moment_matrix,
    sup_linear,
)

from oracles import pga_sup_linear, sqrt_affine_fixed_point


def spec_for(S_list, m_tilde=1.0, r=math.inf):
    return LinearClassSpec(m_tilde=m_tilde, second_moments=tuple(S_list), r=r)


class TestSupLinear:
    def test_ball_only(self):
        spec = spec_for([np.zeros((2, 2))], m_tilde=2.0)
        assert sup_linear([np.array([1.0, 0.0])], spec) == pytest.approx(2.0)

    def test_variance_binds_rank_one(self):
        # single sample x = (1,0): the constraint |theta.x| <= sqrt(r) caps
        # the value at 1 even though the ball allows 2
        x = np.array([1.0, 0.0])
        spec = spec_for([np.outer(x, x)], m_tilde=2.0, r=1.0)
        assert sup_linear([x], spec) == pytest.approx(1.0, rel=1e-12)

    def test_zero_aggregate(self):
        spec = spec_for([np.eye(3)], m_tilde=2.0, r=1.0)
        assert sup_linear([np.zeros(3)], spec) == 0.0

    def test_nested_constraint_cases(self):
        # S = I: value = m_tilde*|c| when r >= m_tilde^2, else sqrt(r)|c|
        c = np.array([3.0, 4.0])
        spec_loose = spec_for([np.eye(2)], m_tilde=1.0, r=4.0)
        assert sup_linear([c], spec_loose) == pytest.approx(5.0)
        spec_tight = spec_for([np.eye(2)], m_tilde=1.0, r=0.25)
        assert sup_linear([c], spec_tight) == pytest.approx(2.5)

    def test_sums_over_tasks(self):
        c = np.array([1.0, 0.0])
        spec = spec_for([np.zeros((2, 2))] * 3, m_tilde=1.5)
        assert sup_linear([c, c, c], spec) == pytest.approx(4.5)

    def test_task_count_mismatch(self):
        spec = spec_for([np.zeros((2, 2))])
        with pytest.raises(StructuralError):
            sup_linear([np.zeros(2), np.zeros(2)], spec)

    def test_non_psd_rejected(self):
        S = np.array([[1.0, 0.0], [0.0, -0.5]])
        with pytest.raises(InvariantError):
            sup_linear([np.array([1.0, 1.0])], spec_for([S], r=1.0))

    def test_against_pga_oracle_small_batch(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            D = int(rng.integers(1, 6))
            c = rng.normal(size=D)
            A = rng.normal(size=(D, D))
            S = A.T @ A / D
            m_tilde = float(rng.uniform(0.5, 3.0))
            r = float(rng.uniform(0.05, 2.0))
            ours = sup_linear([c], spec_for([S], m_tilde=m_tilde, r=r))
            oracle = pga_sup_linear(c, S, m_tilde, r)
            assert ours == pytest.approx(oracle, rel=1e-8, abs=1e-10)

    def test_null_space_component(self):
        # c has a component outside range(S): ellipsoid alone cannot bind it
        S = np.diag([1.0, 0.0])
        c = np.array([1.0, 1.0])
        val = sup_linear([c], spec_for([S], m_tilde=1.0, r=0.01))
        oracle = pga_sup_linear(c, S, 1.0, 0.01)
        assert val == pytest.approx(oracle, rel=1e-8)


class TestEstimateLfrc:
    def test_single_sample_norm_ball(self):
        # |zeta| = 1, so every draw gives exactly m_tilde * |x|
        X = np.array([[1.0, 0.0]])
        spec = spec_for([second_moment_matrix(X)], m_tilde=2.0, r=math.inf)
        est, stderr = estimate_lfrc([X], [None], spec, n_draws=16, seed=0)
        assert est == pytest.approx(2.0, abs=1e-14)
        assert stderr == pytest.approx(0.0, abs=1e-14)

    def test_zero_features(self):
        X = np.zeros((5, 3))
        spec = spec_for([second_moment_matrix(X)], m_tilde=2.0, r=1.0)
        est, _ = estimate_lfrc([X], [None], spec, n_draws=8, seed=1)
        assert est == 0.0

    def test_two_identical_single_sample_tasks_match_one(self):
        # with one sample per task the supremum is sign-invariant, so the
        # two-task average equals the single-task value exactly
        X = np.array([[0.6, 0.8]])
        S = second_moment_matrix(X)
        spec1 = spec_for([S], m_tilde=2.0)
        spec2 = spec_for([S, S], m_tilde=2.0)
        est1, _ = estimate_lfrc([X], [None], spec1, n_draws=16, seed=3)
        est2, _ = estimate_lfrc([X, X], [None, None], spec2, n_draws=16, seed=3)
        assert est2 == pytest.approx(est1, rel=1e-14)

    def test_monotone_in_r_and_m_tilde_same_draws(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(12, 3))
        S = second_moment_matrix(X)
        vals_r = []
        for r in (0.01, 0.1, 1.0, 10.0):
            est, _ = estimate_lfrc([X], [None], spec_for([S], m_tilde=2.0, r=r),
                                   n_draws=32, seed=7)
            vals_r.append(est)
        assert all(b >= a - 1e-12 for a, b in zip(vals_r, vals_r[1:]))
        vals_m = []
        for m_tilde in (0.5, 1.0, 2.0, 4.0):
            est, _ = estimate_lfrc([X], [None],
                                   spec_for([S], m_tilde=m_tilde, r=1.0),
                                   n_draws=32, seed=7)
            vals_m.append(est)
        assert all(b >= a - 1e-12 for a, b in zip(vals_m, vals_m[1:]))

    def test_global_complexity_closed_form(self):
        # r = inf reduces to the norm-ball complexity m_tilde * E|aggregate|;
        # replay the same sign draws through the closed form
        rng = np.random.default_rng(5)
        X = rng.normal(size=(10, 4))
        m_tilde = 1.7
        spec = spec_for([second_moment_matrix(X)], m_tilde=m_tilde, r=math.inf)
        n_draws, seed = 64, 13
        est, _ = estimate_lfrc([X], [None], spec, n_draws=n_draws, seed=seed)
        rng2 = np.random.default_rng(seed)
        vals = []
        for _ in range(n_draws):
            zeta = rng2.integers(0, 2, size=X.shape[0]) * 2.0 - 1.0
            vals.append(m_tilde * np.linalg.norm(zeta @ X / X.shape[0]))
        assert est == pytest.approx(float(np.mean(vals)), rel=1e-14)

    def test_cover_size_mismatch_rejected(self):
        X = np.zeros((3, 2))
        _, cover = bipartite_ranking_graph(2, 2)  # graph on 4 vertices
        spec = spec_for([second_moment_matrix(X)])
        with pytest.raises(StructuralError):
            estimate_lfrc([X], [cover], spec, n_draws=1, seed=0)

    def test_matching_cover_accepted(self):
        g, cover = bipartite_ranking_graph(2, 2)
        X = np.ones((4, 2))
        spec = spec_for([second_moment_matrix(X)], m_tilde=1.0)
        est, _ = estimate_lfrc([X], [cover], spec, n_draws=4, seed=0)
        assert est >= 0.0

    def test_draw_count_validated(self):
        X = np.ones((2, 2))
        spec = spec_for([second_moment_matrix(X)])
        with pytest.raises(DomainError):
            estimate_lfrc([X], [None], spec, n_draws=0, seed=0)

    def test_seed_reproducibility(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(8, 3))
        spec = spec_for([second_moment_matrix(X)], m_tilde=1.0, r=0.5)
        a = estimate_lfrc([X], [None], spec, n_draws=16, seed=42)
        b = estimate_lfrc([X], [None], spec, n_draws=16, seed=42)
        assert a == b


class TestFixedPoint:
    def test_pure_sqrt(self):
        h = SubRootHandle(fn=math.sqrt)
        assert fixed_point(h) == pytest.approx(1.0, abs=1e-9)

    def test_affine_sqrt_closed_form(self):
        h = SubRootHandle(fn=lambda r: 2.0 * math.sqrt(r) + 3.0)
        r_star = fixed_point(h)
        assert r_star == pytest.approx(9.0, abs=1e-9)
        assert r_star == pytest.approx(sqrt_affine_fixed_point(2.0, 3.0), abs=1e-9)

    def test_scaled_sqrt(self):
        h = SubRootHandle(fn=lambda r: 0.5 * math.sqrt(r))
        assert fixed_point(h) == pytest.approx(0.25, abs=1e-10)

    def test_residual_tolerance_contract(self):
        h = SubRootHandle(fn=lambda r: 3.3 * math.sqrt(r) + 0.7)
        tol = 1e-10
        r = fixed_point(h, tol=tol)
        assert abs(h.fn(r) - r) <= tol * max(1.0, r)

    def test_lemma_directions_on_grid(self):
        # f(r) >= r below the fixed point, f(r) <= r above it
        a, b = 1.3, 2.1
        h = SubRootHandle(fn=lambda r: a * math.sqrt(r) + b)
        r_star = fixed_point(h)
        for r in np.geomspace(r_star * 1e-4, r_star * 0.999, 25):
            assert h.fn(r) >= r
        for r in np.geomspace(r_star * 1.001, r_star * 1e4, 25):
            assert h.fn(r) <= r

    def test_non_sub_root_rejected(self):
        with pytest.raises(DomainError):
            fixed_point(SubRootHandle(fn=lambda r: r * r, r_hi=10.0))

    def test_trivial_zero_rejected(self):
        with pytest.raises(DomainError):
            fixed_point(SubRootHandle(fn=lambda r: 0.0))

    def test_decreasing_rejected(self):
        with pytest.raises(DomainError):
            fixed_point(SubRootHandle(fn=lambda r: 1.0 / (1.0 + r), r_hi=10.0))

    def test_large_fixed_point_beyond_r_hi(self):
        # bracketing expands upward past the declared search ceiling
        h = SubRootHandle(fn=lambda r: 2e4 * math.sqrt(r), r_hi=1e3)
        assert fixed_point(h) == pytest.approx(4e8, rel=1e-9)
