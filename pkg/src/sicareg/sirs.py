"""Sequentially and iteratively reweighted squares for noiseless sparse
recovery: weighted min-norm iterations with thresholded sequential restarts,
plus the fixed-point diagnostic for candidate solutions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .linalg import DesignProblem, default_ridge, ridge_limit_apply, weighted_min_norm

DEFAULT_A_GRID = (0.0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.6, 1.0, 2.0, 5.0)


@dataclass
class SirsConfig:
    """Knobs for the recovery iteration.

    sparsity_budget   target support size S (default ceil(n/2))
    max_iters         inner iterations L per pass
    max_restarts      sequential restarts M (capped at S, default S)
    floor_constant    restart floor in (0,1) (default 1/p)
    a_grid            shape-parameter grid searched by sirs_auto
    converge_tol      relative inf-norm change declaring inner convergence
    hard_threshold    relative magnitude below which entries are zeroed
    """

    sparsity_budget: Optional[int] = None
    max_iters: int = 50
    max_restarts: Optional[int] = None
    floor_constant: Optional[float] = None
    a_grid: Optional[Sequence[float]] = DEFAULT_A_GRID
    converge_tol: float = 1e-8
    hard_threshold: float = 1e-6

    def resolve(self, n: int, p: int) -> "SirsConfig":
        """Fill shape-dependent defaults for an n x p problem."""
        S = self.sparsity_budget if self.sparsity_budget is not None else math.ceil(n / 2)
        M = self.max_restarts if self.max_restarts is not None else S
        eps = self.floor_constant if self.floor_constant is not None else 1.0 / p
        grid = tuple(self.a_grid) if self.a_grid is not None else DEFAULT_A_GRID
        if S < 1:
            raise ValueError("sparsity_budget must be positive")
        if not 0 < eps < 1:
            raise ValueError("floor_constant must lie in (0, 1)")
        if M > S:
            raise ValueError("max_restarts must not exceed sparsity_budget")
        if any(a < 0 for a in grid):
            raise ValueError("a_grid values must be nonnegative")
        return SirsConfig(
            S, self.max_iters, M, eps, grid, self.converge_tol, self.hard_threshold
        )


@dataclass
class RecoveryResult:
    beta_hat: np.ndarray
    support: tuple[int, ...]
    a_used: float
    restarts_used: int
    iterations: int
    converged: bool
    sparse_enough: bool

    @property
    def num_nonzero(self) -> int:
        return len(self.support)


def sirs_weights(a: float, beta: np.ndarray) -> np.ndarray:
    """Per-coordinate quadratic weights d_j = b_j^2 / rho_a(|b_j|).

    a = 0 uses the counting penalty (d_j = b_j^2); a = inf gives d_j = |b_j|.
    Weights vanish exactly where beta does.
    """
    if a < 0:
        raise ValueError("a must be nonnegative")
    beta = np.asarray(beta, dtype=float)
    ab = np.abs(beta)
    if a == 0.0:
        return ab * ab
    if math.isinf(a):
        return ab
    return ab * (a + ab) / (a + 1.0)


def sirs_step(
    X: np.ndarray,
    y: np.ndarray,
    beta_prev: np.ndarray,
    a: float,
    ridge: Optional[float] = None,
    exact: bool = False,
) -> np.ndarray:
    """One reweighted min-norm update v(beta_prev).

    The default path solves the small ridge system; exact=True uses the
    rank-revealing pseudoinverse route instead.
    """
    d = sirs_weights(a, beta_prev)
    if exact:
        return weighted_min_norm(X, d, y)
    if ridge is None:
        ridge = default_ridge(X, d)
        if ridge <= 0.0:
            return np.zeros(X.shape[1])
    return ridge_limit_apply(X, d, y, ridge)


def _threshold(beta: np.ndarray, rel: float) -> np.ndarray:
    peak = np.max(np.abs(beta)) if beta.size else 0.0
    out = beta.copy()
    out[np.abs(out) < rel * peak] = 0.0
    return out


def sirs_recover(problem: DesignProblem, cfg: SirsConfig, a: float) -> RecoveryResult:
    """Run the full recovery loop at a fixed shape parameter a.

    Each pass iterates the reweighted update from its starting point until
    the relative inf-norm change drops below converge_tol or max_iters is
    hit, then hard-thresholds. If the result is not sparse enough, restart
    k reinitializes at 1 on the k largest coordinates and at the floor
    elsewhere, up to max_restarts passes.
    """
    cfg = cfg.resolve(problem.n, problem.p)
    X, y, p = problem.X, problem.y, problem.p
    if not np.any(y):
        return RecoveryResult(np.zeros(p), (), a, 0, 0, True, True)

    total_iters = 0
    beta_tilde = np.zeros(p)
    converged = False
    restarts = 0
    start = np.ones(p)
    for k in range(cfg.max_restarts + 1):
        beta = start
        converged = False
        for _ in range(cfg.max_iters):
            nxt = sirs_step(X, y, beta, a)
            total_iters += 1
            delta = np.max(np.abs(nxt - beta))
            scale = max(1.0, np.max(np.abs(beta)))
            beta = nxt
            if delta <= cfg.converge_tol * scale:
                converged = True
                break
        beta_tilde = _threshold(beta, cfg.hard_threshold)
        restarts = k
        if np.count_nonzero(beta_tilde) <= cfg.sparsity_budget:
            break
        if k == cfg.max_restarts:
            break
        gamma_k = np.sort(np.abs(beta_tilde))[::-1][k]  # (k+1)-th restart level
        start = np.where(np.abs(beta_tilde) >= gamma_k, 1.0, cfg.floor_constant)

    support = tuple(int(j) for j in np.flatnonzero(beta_tilde))
    sparse_enough = len(support) <= cfg.sparsity_budget
    return RecoveryResult(
        beta_tilde, support, a, restarts, total_iters, converged, sparse_enough
    )


def sirs_auto(problem: DesignProblem, cfg: SirsConfig) -> RecoveryResult:
    """Grid search over cfg.a_grid, keeping the sparsest acceptable solution.

    Preference order: converged sparse-enough runs, then sparse-enough runs,
    then the sparsest attempt (flagged). Ties go to the earlier grid entry.
    """
    cfg_r = cfg.resolve(problem.n, problem.p)
    runs = [sirs_recover(problem, cfg_r, a) for a in cfg_r.a_grid]

    def best_of(cands: list[RecoveryResult]) -> Optional[RecoveryResult]:
        winner = None
        for r in cands:
            if winner is None or r.num_nonzero < winner.num_nonzero:
                winner = r
        return winner

    winner = best_of([r for r in runs if r.sparse_enough and r.converged])
    if winner is None:
        winner = best_of([r for r in runs if r.sparse_enough])
    if winner is None:
        winner = best_of(runs)
    return winner


def check_fixed_point(
    X: np.ndarray,
    y: np.ndarray,
    beta: np.ndarray,
    a: float = 1.0,
    feas_rtol: float = 1e-8,
) -> float:
    """Inf-norm residual ||v(beta) - beta|| of the reweighted update.

    beta must satisfy y = X beta to relative tolerance feas_rtol. A zero
    residual at a sufficiently sparse beta identifies the sparsest solution
    when spark(X) = n + 1.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    beta = np.asarray(beta, dtype=float).ravel()
    scale = max(np.linalg.norm(y), 1e-300)
    if np.linalg.norm(y - X @ beta) > feas_rtol * scale:
        raise ValueError("beta is not feasible for y = X beta")
    v = sirs_step(X, y, beta, a, exact=True)
    return float(np.max(np.abs(v - beta)))
