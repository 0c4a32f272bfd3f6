"""Dense linear-algebra substrate: min-norm solves, ridge-limit weighted
solves, brute-force spark, Gram spectra, and headerless CSV matrix I/O."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

RANK_RTOL = 1e-10  # singular values below RANK_RTOL * sigma_max count as zero


class EnumerationBudgetError(RuntimeError):
    """Raised when a combinatorial search would exceed its budget."""


@dataclass
class DesignProblem:
    """Design matrix, response, and (optionally) the ground truth.

    support0 is derived from beta0 when omitted and must match its nonzero
    pattern when given. Columns of X must not be identically zero.
    """

    X: np.ndarray
    y: np.ndarray
    beta0: Optional[np.ndarray] = None
    support0: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.X.ndim != 2:
            raise ValueError("X must be a 2-D matrix")
        n, p = self.X.shape
        if self.y.shape[0] != n:
            raise ValueError(f"y has length {self.y.shape[0]}, expected {n}")
        norms = np.linalg.norm(self.X, axis=0)
        if np.any(norms == 0):
            raise ValueError("X contains an all-zero column")
        if self.beta0 is not None:
            self.beta0 = np.asarray(self.beta0, dtype=float).ravel()
            if self.beta0.shape[0] != p:
                raise ValueError("beta0 length does not match p")
            true_supp = tuple(int(j) for j in np.flatnonzero(self.beta0))
            if self.support0 is None:
                self.support0 = true_supp
            elif tuple(sorted(self.support0)) != true_supp:
                raise ValueError("support0 does not match nonzeros of beta0")
        elif self.support0 is not None:
            self.support0 = tuple(sorted(int(j) for j in self.support0))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


def min_l2_solution(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Minimum-L2-norm solution of y = X b (least squares when inconsistent).

    Equals pinv(X) @ y with singular values below RANK_RTOL * sigma_max
    treated as zero.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    beta, *_ = np.linalg.lstsq(X, y, rcond=RANK_RTOL)
    return beta


def default_ridge(X: np.ndarray, d: np.ndarray) -> float:
    """Scale-aware ridge for the weighted min-norm solve: 1e-12 tr(X D X^T)/n."""
    tr = float(np.sum(d * np.einsum("ij,ij->j", X, X)))
    return 1e-12 * tr / X.shape[0]


def ridge_limit_apply(
    X: np.ndarray, d: np.ndarray, y: np.ndarray, ridge: float
) -> np.ndarray:
    """Compute D X^T (ridge I_n + X D X^T)^{-1} y without a pseudoinverse.

    Uses the n-sized system when p >= n and the transposed p-sized form
    D^{1/2}(ridge I_p + D^{1/2} X^T X D^{1/2})^{-1} D^{1/2} X^T y otherwise,
    so each call costs O(n p min(n, p)). As ridge -> 0+ the result converges
    to D X^T (X D X^T)^+ y.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    d = np.asarray(d, dtype=float).ravel()
    if np.any(d < 0):
        raise ValueError("weights d must be nonnegative")
    if ridge <= 0:
        raise ValueError("ridge must be positive")
    n, p = X.shape
    if not np.any(d > 0):
        return np.zeros(p)
    if p >= n:
        Xd = X * d  # n x p
        A = Xd @ X.T
        A[np.diag_indices_from(A)] += ridge
        u = scipy.linalg.solve(A, y, assume_a="pos")
        return Xd.T @ u
    sq = np.sqrt(d)
    B = X * sq  # n x p, columns scaled
    A = B.T @ B
    A[np.diag_indices_from(A)] += ridge
    u = scipy.linalg.solve(A, B.T @ y, assume_a="pos")
    return sq * u


def weighted_min_norm(X: np.ndarray, d: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Exact D X^T (X D X^T)^+ y via a rank-revealing min-norm solve."""
    X = np.asarray(X, dtype=float)
    d = np.asarray(d, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if np.any(d < 0):
        raise ValueError("weights d must be nonnegative")
    Xd = X * d
    A = Xd @ X.T
    u, *_ = np.linalg.lstsq(A, y, rcond=RANK_RTOL)
    return Xd.T @ u


def spark_bruteforce(
    X: np.ndarray, max_card: int, budget: float = 1e7
) -> Optional[int]:
    """Smallest k <= max_card with a linearly dependent k-column subgroup.

    Returns None when every subgroup of size <= max_card is independent.
    Rank deficiency is judged by smallest/largest singular value of the
    submatrix against RANK_RTOL.
    """
    X = np.asarray(X, dtype=float)
    p = X.shape[1]
    max_card = min(max_card, p)
    total = sum(math.comb(p, k) for k in range(1, max_card + 1))
    if total > budget:
        raise EnumerationBudgetError(
            f"{total:.3g} subsets of size <= {max_card} exceeds budget {budget:.0e}"
        )
    n = X.shape[0]
    for k in range(1, max_card + 1):
        if k > n:
            return k  # more columns than rows: always dependent
        for cols in combinations(range(p), k):
            sv = np.linalg.svd(X[:, cols], compute_uv=False)
            if sv[-1] <= RANK_RTOL * sv[0]:
                return k
    return None


def gram_min_eigen(X: np.ndarray, S: Sequence[int]) -> float:
    """Smallest eigenvalue of X_S^T X_S (clipped at zero)."""
    S = list(S)
    if len(S) == 0:
        raise ValueError("index set S must be nonempty")
    Xs = np.asarray(X, dtype=float)[:, S]
    w = np.linalg.eigvalsh(Xs.T @ Xs)
    return max(float(w[0]), 0.0)


def null_space(X: np.ndarray) -> np.ndarray:
    """Orthonormal basis of null(X) from the SVD (p x q)."""
    X = np.asarray(X, dtype=float)
    _, s, Vt = np.linalg.svd(X, full_matrices=True)
    rank = int(np.sum(s > RANK_RTOL * s[0])) if s.size else 0
    return Vt[rank:].T


def read_matrix(path) -> np.ndarray:
    """Read a headerless CSV of comma-separated decimals; dimensions inferred."""
    rows: list[list[float]] = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            fields = stripped.split(",")
            try:
                row = [float(f) for f in fields]
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ValueError(
                    f"{path}: line {lineno}: expected {width} fields, got {len(row)}"
                )
            rows.append(row)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return np.asarray(rows, dtype=float)


def read_vector(path) -> np.ndarray:
    """Read a CSV holding a single row or column."""
    M = read_matrix(path)
    if 1 not in M.shape:
        raise ValueError(f"{path}: expected a vector, got shape {M.shape}")
    return M.ravel()


def write_matrix(path, M: np.ndarray) -> None:
    """Write a matrix (or vector, as a column) as headerless CSV."""
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    with open(path, "w", encoding="utf-8") as fh:
        for row in M:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")
