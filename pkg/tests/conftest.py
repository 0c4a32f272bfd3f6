import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_sparse_problem(rng, n, p, s, noise=0.0, unit_columns=True):
    """Random Gaussian design with a planted sparse truth."""
    from sicareg.linalg import DesignProblem

    X = rng.standard_normal((n, p))
    if unit_columns:
        X = X / np.linalg.norm(X, axis=0)
    beta0 = np.zeros(p)
    support = rng.choice(p, size=s, replace=False)
    beta0[support] = rng.uniform(0.5, 2.0, s) * rng.choice([-1.0, 1.0], s)
    y = X @ beta0
    if noise > 0:
        y = y + noise * rng.standard_normal(n)
    return DesignProblem(X, y, beta0)


def single_noise_column_design(s=10, r=0.5, beta_abs=1.0, signs=None, extra=1):
    """Orthonormal signal block, one noise column correlated r with the
    response direction, remaining columns in the orthogonal complement."""
    from sicareg.linalg import DesignProblem

    n = s + 1 + extra
    p = s + 1 + extra
    if signs is None:
        signs = np.ones(s)
    X = np.zeros((n, p))
    X[:s, :s] = np.eye(s)
    u = X[:, :s] @ (signs / np.sqrt(s))
    h = np.zeros(n)
    h[s] = 1.0
    X[:, s] = r * u + np.sqrt(1.0 - r * r) * h
    for k in range(extra):
        e = np.zeros(n)
        e[s + 1 + k] = 1.0
        X[:, s + 1 + k] = e
    beta0 = np.zeros(p)
    beta0[:s] = beta_abs * signs
    return DesignProblem(X, X @ beta0, beta0)
