import math

import numpy as np
import pytest

from conftest import random_sparse_problem
from sicareg import lla as A
from sicareg import penalty as P
from sicareg.linalg import DesignProblem


def ortho_design(rng, n, p):
    Q, _ = np.linalg.qr(rng.standard_normal((n, p)))
    return Q


class TestWeightedLasso:
    def test_unit_weights_reduce_to_lasso(self, rng):
        X = rng.standard_normal((40, 12))
        y = rng.standard_normal(40)
        gamma = 3.0
        b1 = A.weighted_lasso(X, y, np.ones(12), gamma)
        # doubled weights at half the level give the same problem
        b2 = A.weighted_lasso(X, y, 2.0 * np.ones(12), gamma / 2.0)
        assert np.allclose(b1, b2, atol=1e-8)

    def test_orthonormal_closed_form(self, rng):
        X = ortho_design(rng, 50, 10)
        y = rng.standard_normal(50)
        w = rng.uniform(0.2, 2.0, 10)
        gamma = 0.5
        z = X.T @ y
        closed = np.sign(z) * np.maximum(np.abs(z) - gamma * w, 0.0)
        assert np.max(np.abs(A.weighted_lasso(X, y, w, gamma) - closed)) < 1e-8

    def test_gamma_zero_full_rank_ols(self, rng):
        X = rng.standard_normal((30, 8))
        y = rng.standard_normal(30)
        ols = np.linalg.lstsq(X, y, rcond=None)[0]
        assert np.allclose(A.weighted_lasso(X, y, np.ones(8), 0.0), ols, atol=1e-8)

    def test_kkt_on_random_problems(self, rng):
        for _ in range(20):
            n, p = int(rng.integers(20, 60)), int(rng.integers(5, 30))
            X = rng.standard_normal((n, p))
            y = rng.standard_normal(n)
            w = rng.uniform(0.0, 2.0, p)
            gamma = float(rng.uniform(0.1, 5.0))
            beta = A.weighted_lasso(X, y, w, gamma)
            tol = 1e-6 * (1.0 + np.max(np.abs(X.T @ y)))
            assert A.lasso_kkt_violation(X, y, w, gamma, beta) <= tol

    def test_zero_weight_coordinate_unpenalized(self, rng):
        X = rng.standard_normal((25, 4))
        y = rng.standard_normal(25)
        w = np.array([0.0, 1.0, 1.0, 1.0])
        beta = A.weighted_lasso(X, y, w, 50.0)
        # huge level kills weighted coords; the free one solves 1-D least squares
        assert np.all(beta[1:] == 0.0)
        assert beta[0] == pytest.approx(float(X[:, 0] @ y) / float(X[:, 0] @ X[:, 0]))

    def test_negative_weight_rejected(self, rng):
        with pytest.raises(ValueError):
            A.weighted_lasso(np.eye(3), np.ones(3), np.array([1.0, -1.0, 1.0]), 1.0)


class TestLlaFit:
    def test_l1_single_outer(self, rng):
        prob = random_sparse_problem(rng, 40, 10, 3, noise=0.1)
        fit = A.lla_fit(prob, P.l1(), 0.5)
        assert fit.outer_iters == 1
        lasso = A.weighted_lasso(prob.X, prob.y, np.ones(10), 0.5)
        assert np.allclose(fit.beta_hat, lasso, atol=1e-10)

    def test_orthonormal_matches_scalar_fixed_point(self, rng):
        X = ortho_design(rng, 60, 8)
        y = rng.standard_normal(60) * 2.0
        prob = DesignProblem(X, y)
        lam = 0.4
        pen = P.sica(1.0, lam=lam)
        fit = A.lla_fit(prob, pen, lam)
        z = X.T @ y
        for j in range(8):
            # per-coordinate fixed point: soft(z_j, lam * rho'(|theta|))
            theta = math.copysign(max(abs(z[j]) - lam, 0.0), z[j])
            for _ in range(200):
                w = float(P.rho_prime(pen, abs(theta)))
                nxt = math.copysign(max(abs(z[j]) - lam * w, 0.0), z[j])
                if abs(nxt - theta) <= 1e-12:
                    theta = nxt
                    break
                theta = nxt
            assert fit.beta_hat[j] == pytest.approx(theta, abs=1e-8)

    def test_objective_descent(self, rng):
        for a in (0.1, 1.0, 5.0, math.inf):
            prob = random_sparse_problem(rng, 30, 12, 3, noise=0.2)
            fit = A.lla_fit(prob, P.sica(a), 0.3)
            trace = fit.objective_trace
            assert all(
                trace[i + 1] <= trace[i] + 1e-10 * max(1.0, abs(trace[i]))
                for i in range(len(trace) - 1)
            )

    def test_fixpoint_consistency(self, rng):
        prob = random_sparse_problem(rng, 40, 15, 4, noise=0.1)
        fit = A.lla_fit(prob, P.sica(1.0), 0.2)
        refit = A.lla_fit(prob, P.sica(1.0), 0.2, init=fit.beta_hat)
        assert np.max(np.abs(refit.beta_hat - fit.beta_hat)) <= 1e-8

    def test_one_step_variant(self, rng):
        prob = random_sparse_problem(rng, 40, 15, 4, noise=0.1)
        fit = A.lla_fit(prob, P.sica(0.5), 0.2, max_outer=1)
        assert fit.outer_iters == 1
        # one step from the lasso equals one reweighted solve
        lasso = A.weighted_lasso(prob.X, prob.y, np.ones(15), 0.2)
        pen = P.sica(0.5, lam=0.2)
        w = P.rho_prime(pen, np.abs(lasso))
        manual = A.weighted_lasso(prob.X, prob.y, w, 0.2, beta0=lasso)
        assert np.allclose(fit.beta_hat, manual, atol=1e-12)

    def test_weight_cap_at_zero(self):
        pen = P.sica(0.5, lam=1.0)
        w = P.rho_prime(pen, np.abs(np.array([0.0, 0.3, 4.0])))
        assert np.max(w) == pytest.approx(P.rho_prime_at_zero(pen))
        assert np.argmax(w) == 0

    def test_l0_rejected(self, rng):
        prob = random_sparse_problem(rng, 10, 5, 2)
        with pytest.raises(P.UnsupportedDerivativeError):
            A.lla_fit(prob, P.PenaltySpec("l0"), 0.5)

    def test_objective_field_matches(self, rng):
        prob = random_sparse_problem(rng, 30, 10, 3, noise=0.1)
        fit = A.lla_fit(prob, P.sica(2.0), 0.4)
        assert fit.objective == pytest.approx(
            A.objective(prob, fit.pen, fit.beta_hat)
        )


class TestZEstimatorCheck:
    def test_well_separated_fit_passes(self, rng):
        prob = random_sparse_problem(rng, 60, 12, 3, noise=0.05, unit_columns=False)
        fit = A.lla_fit(prob, P.sica(1.0), 1.0)
        cert = A.zestimator_check(prob, fit)
        assert cert.stationarity_residual <= 1e-6 * (1 + np.max(np.abs(fit.beta_hat)))
        assert cert.inactive_margin >= -1e-6
        assert cert.eigenvalue_margin >= -1e-6
        assert cert.ok

    def test_lambda_zero_ols(self, rng):
        X = rng.standard_normal((30, 6))
        y = rng.standard_normal(30)
        prob = DesignProblem(X, y)
        fit = A.lla_fit(prob, P.sica(1.0), 0.0)
        cert = A.zestimator_check(prob, fit)
        assert cert.stationarity_residual <= 1e-8 * (1 + np.max(np.abs(fit.beta_hat)))
        assert cert.inactive_margin is None

    def test_l1_eigen_margin_is_min_eigenvalue(self, rng):
        prob = random_sparse_problem(rng, 50, 8, 3, noise=0.1, unit_columns=False)
        fit = A.lla_fit(prob, P.l1(), 0.8)
        cert = A.zestimator_check(prob, fit)
        M = list(fit.support)
        Q = prob.X[:, M].T @ prob.X[:, M]
        assert cert.eigenvalue_margin == pytest.approx(
            float(np.linalg.eigvalsh(Q)[0])
        )
        assert cert.eigenvalue_margin > 0

    def test_empty_support(self, rng):
        X = rng.standard_normal((20, 5))
        y = 1e-3 * rng.standard_normal(20)
        prob = DesignProblem(X, y)
        fit = A.lla_fit(prob, P.l1(), 1e3)
        assert fit.support == ()
        cert = A.zestimator_check(prob, fit)
        assert cert.ok
