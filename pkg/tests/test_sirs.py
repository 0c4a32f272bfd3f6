import math

import numpy as np
import pytest
from scipy.optimize import linprog

from conftest import random_sparse_problem
from sicareg import sirs as S
from sicareg.linalg import DesignProblem, min_l2_solution


def basis_pursuit(X, y):
    """LP oracle: min ||b||_1 subject to X b = y via split variables."""
    n, p = X.shape
    res = linprog(
        c=np.ones(2 * p),
        A_eq=np.hstack([X, -X]),
        b_eq=y,
        bounds=[(0, None)] * (2 * p),
        method="highs",
    )
    assert res.success
    return res.x[:p] - res.x[p:]


class TestWeights:
    def test_zero_vector(self):
        assert np.all(S.sirs_weights(0.7, np.zeros(5)) == 0.0)

    def test_a1_unit(self):
        assert S.sirs_weights(1.0, np.array([1.0]))[0] == pytest.approx(1.0)

    def test_a0_squares(self):
        b = np.array([0.0, 2.0, -3.0])
        assert np.allclose(S.sirs_weights(0.0, b), [0.0, 4.0, 9.0])

    def test_infinite_a_is_absolute_value(self):
        b = np.array([0.5, -2.0, 0.0])
        exact = S.sirs_weights(math.inf, b)
        assert np.allclose(exact, np.abs(b))
        # large finite a approaches the same limit
        assert np.allclose(S.sirs_weights(1e8, b), exact, atol=1e-7)

    def test_zero_iff_zero(self, rng):
        b = rng.standard_normal(20)
        b[[3, 8]] = 0.0
        d = S.sirs_weights(0.4, b)
        assert np.array_equal(d == 0.0, b == 0.0)

    def test_negative_a_rejected(self):
        with pytest.raises(ValueError):
            S.sirs_weights(-0.1, np.ones(2))


class TestStep:
    def test_truth_is_fixed_point(self, rng):
        prob = random_sparse_problem(rng, 10, 30, 3)
        for a in (0.1, 1.0, math.inf):
            v = S.sirs_step(prob.X, prob.y, prob.beta0, a)
            assert np.max(np.abs(v - prob.beta0)) < 1e-8

    def test_square_nonsingular(self, rng):
        X = rng.standard_normal((6, 6))
        y = rng.standard_normal(6)
        exact = np.linalg.solve(X, y)
        v = S.sirs_step(X, y, np.ones(6), 0.5)
        assert np.allclose(v, exact, atol=1e-6)

    def test_all_ones_start_gives_min_norm(self, rng):
        # constant weights reduce the weighted norm to the plain L2 norm
        prob = random_sparse_problem(rng, 8, 24, 3)
        v = S.sirs_step(prob.X, prob.y, np.ones(24), 1.0)
        assert np.allclose(v, min_l2_solution(prob.X, prob.y), atol=1e-8)


class TestRecover:
    def test_small_instance_recovers(self, rng):
        prob = random_sparse_problem(rng, 8, 20, 2)
        res = S.sirs_recover(prob, S.SirsConfig(), 0.3)
        assert res.support == prob.support0
        assert res.sparse_enough and res.converged
        assert np.max(np.abs(res.beta_hat - prob.beta0)) < 1e-6

    def test_square_nonsingular_one_pass(self, rng):
        X = rng.standard_normal((5, 5))
        beta0 = np.array([1.0, 0.0, -2.0, 0.0, 0.5])
        prob = DesignProblem(X, X @ beta0, beta0)
        res = S.sirs_recover(prob, S.SirsConfig(sparsity_budget=5), 1.0)
        assert res.converged and res.restarts_used == 0
        assert np.allclose(res.beta_hat, beta0, atol=1e-6)

    def test_zero_response(self, rng):
        X = rng.standard_normal((4, 10))
        res = S.sirs_recover(DesignProblem(X, np.zeros(4)), S.SirsConfig(), 0.5)
        assert res.converged and res.sparse_enough
        assert np.all(res.beta_hat == 0.0)

    def test_feasibility_of_iterates(self, rng):
        # final iterate stays on the solution set up to the ridge tolerance
        prob = random_sparse_problem(rng, 10, 40, 3)
        res = S.sirs_recover(prob, S.SirsConfig(), 0.5)
        resid = np.linalg.norm(prob.y - prob.X @ res.beta_hat)
        assert resid <= 1e-6 * np.linalg.norm(prob.y)

    def test_surrogate_descent(self, rng):
        # each update minimizes the weighted quadratic built at the previous
        # iterate, so that quadratic cannot increase
        prob = random_sparse_problem(rng, 10, 30, 3)
        beta = np.ones(30)
        for _ in range(15):
            nxt = S.sirs_step(prob.X, prob.y, beta, 0.4)
            d = S.sirs_weights(0.4, beta)
            live = d > 0
            before = float(np.sum(beta[live] ** 2 / d[live]))
            after = float(np.sum(nxt[live] ** 2 / d[live]))
            assert after <= before + 1e-8 * max(1.0, before)
            beta = nxt

    def test_bit_reproducible(self, rng):
        prob = random_sparse_problem(rng, 9, 25, 3)
        r1 = S.sirs_recover(prob, S.SirsConfig(), 0.2)
        r2 = S.sirs_recover(prob, S.SirsConfig(), 0.2)
        assert np.array_equal(r1.beta_hat, r2.beta_hat)
        assert r1.iterations == r2.iterations

    def test_dimension_mismatch(self, rng):
        with pytest.raises(ValueError):
            DesignProblem(rng.standard_normal((5, 8)), np.zeros(4))


class TestAuto:
    def test_selection_contract(self, rng):
        prob = random_sparse_problem(rng, 8, 20, 2)
        res = S.sirs_auto(prob, S.SirsConfig())
        assert res.a_used in S.DEFAULT_A_GRID
        assert res.sparse_enough

    def test_l1_grid_matches_basis_pursuit(self, rng):
        # orthonormal-ish tiny instance where the L1 relaxation is exact
        prob = random_sparse_problem(rng, 3, 8, 1)
        res = S.sirs_auto(prob, S.SirsConfig(a_grid=(math.inf,), max_iters=200))
        oracle = basis_pursuit(prob.X, prob.y)
        assert np.max(np.abs(res.beta_hat - oracle)) < 1e-5

    def test_prefers_sparsest(self, rng):
        prob = random_sparse_problem(rng, 10, 30, 3)
        res = S.sirs_auto(prob, S.SirsConfig())
        for a in S.DEFAULT_A_GRID:
            attempt = S.sirs_recover(prob, S.SirsConfig(), a)
            if attempt.sparse_enough and attempt.converged:
                assert res.num_nonzero <= attempt.num_nonzero


class TestFixedPoint:
    def test_truth_residual_small(self, rng):
        prob = random_sparse_problem(rng, 10, 30, 3)
        assert S.check_fixed_point(prob.X, prob.y, prob.beta0, a=0.3) <= 1e-8

    def test_min_norm_not_fixed(self, rng):
        prob = random_sparse_problem(rng, 4, 10, 2)
        b2 = min_l2_solution(prob.X, prob.y)
        assert S.check_fixed_point(prob.X, prob.y, b2, a=1.0) > 1e-6

    def test_infeasible_rejected(self, rng):
        prob = random_sparse_problem(rng, 4, 10, 2)
        with pytest.raises(ValueError):
            S.check_fixed_point(prob.X, prob.y, 2.0 * prob.beta0, a=1.0)


class TestConfig:
    def test_defaults_resolve(self):
        cfg = S.SirsConfig().resolve(35, 1000)
        assert cfg.sparsity_budget == 18  # ceil(35/2)
        assert cfg.max_restarts == 18
        assert cfg.floor_constant == pytest.approx(1e-3)

    def test_restart_cap_enforced(self):
        with pytest.raises(ValueError):
            S.SirsConfig(sparsity_budget=3, max_restarts=5).resolve(10, 20)

    def test_floor_range(self):
        with pytest.raises(ValueError):
            S.SirsConfig(floor_constant=1.5).resolve(10, 20)
