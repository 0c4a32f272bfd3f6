"""Simulation studies: seeded design generation, recovery/selection metrics,
information-criterion and cross-validation tuning, and the replication
driver that writes per-replicate rows and median summaries."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import penalty as pen_mod
from .linalg import DesignProblem
from .lla import SelectionFit, lla_fit, weighted_lasso
from .penalty import PenaltySpec
from .sirs import DEFAULT_A_GRID, SirsConfig, sirs_auto, sirs_recover

log = logging.getLogger(__name__)

BETA0_SEVEN = (1.0, -0.5, 0.7, -1.2, -0.9, 0.3, 0.55)
LLA_A_GRID = tuple(a for a in DEFAULT_A_GRID if a > 0)
SCAD_A_GRID = (2.5, 3.0, 3.7, 4.5, 6.0)
MCP_A_GRID = (1.5, 2.0, 3.0, 5.0, 10.0)

STUDIES = ("recovery", "selection_small", "selection_large", "custom")
CORRELATIONS = ("equicorrelated", "ar")


@dataclass
class SimConfig:
    """One simulation study: design law, truth, and replication plan.

    r is the equicorrelation level (also the recovery-study correlation);
    rho is the lag-one level of the autoregressive law. sigma is the noise
    level (0 for noiseless recovery).
    """

    study: str = "custom"
    n: int = 100
    p: int = 50
    s: int = 7
    beta0_values: Sequence[float] = BETA0_SEVEN
    correlation: str = "equicorrelated"
    r: float = 0.0
    rho: float = 0.5
    sigma: float = 0.0
    replications: int = 100
    seed: int = 0
    test_size: int = 10000

    def __post_init__(self):
        if self.study not in STUDIES:
            raise ValueError(f"unknown study {self.study!r}")
        if self.correlation not in CORRELATIONS:
            raise ValueError(f"unknown correlation {self.correlation!r}")
        if self.s > self.p:
            raise ValueError("s must not exceed p")
        if len(self.beta0_values) != self.s:
            raise ValueError("beta0_values must have length s")
        if not -1.0 < self.r < 1.0:
            raise ValueError("equicorrelation r must lie in (-1, 1)")
        if not -1.0 < self.rho < 1.0:
            raise ValueError("autoregressive rho must lie in (-1, 1)")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        self.beta0_values = tuple(float(v) for v in self.beta0_values)

    @property
    def rescale_columns(self) -> bool:
        return self.study == "recovery"

    def beta0_full(self) -> np.ndarray:
        b = np.zeros(self.p)
        b[: self.s] = np.asarray(self.beta0_values, dtype=float)
        return b

    def to_json(self) -> str:
        d = self.__dict__.copy()
        d["beta0_values"] = list(self.beta0_values)
        return json.dumps(d, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SimConfig":
        return cls(**json.loads(text))


def recovery_config(r: float = 0.0, replications: int = 100, seed: int = 0) -> SimConfig:
    """Noiseless recovery study: (s, n, p) = (7, 35, 1000), equicorrelated."""
    return SimConfig(
        study="recovery", n=35, p=1000, s=7, beta0_values=BETA0_SEVEN,
        correlation="equicorrelated", r=r, sigma=0.0,
        replications=replications, seed=seed,
    )


def selection_small_config(sigma: float = 0.3, replications: int = 100, seed: int = 0) -> SimConfig:
    """Noisy selection study: (n, p) = (100, 50), lag-one correlation 0.5."""
    return SimConfig(
        study="selection_small", n=100, p=50, s=7, beta0_values=BETA0_SEVEN,
        correlation="ar", rho=0.5, sigma=sigma,
        replications=replications, seed=seed,
    )


def selection_large_config(sigma: float = 0.3, replications: int = 100, seed: int = 0) -> SimConfig:
    """Noisy selection study: (n, p) = (100, 600), lag-one correlation 0.5."""
    return SimConfig(
        study="selection_large", n=100, p=600, s=7, beta0_values=BETA0_SEVEN,
        correlation="ar", rho=0.5, sigma=sigma,
        replications=replications, seed=seed,
    )


def _sample_rows(cfg: SimConfig, rng: np.random.Generator, rows: int) -> np.ndarray:
    """Draw rows from the configured Gaussian law without forming Sigma.

    Equicorrelated rows use the rank-one symmetric square root
    alpha I + beta 11'; autoregressive rows use the lag-one recursion.
    """
    p = cfg.p
    z = rng.standard_normal((rows, p))
    if cfg.correlation == "equicorrelated":
        r = cfg.r
        if r == 0.0:
            return z
        tail = 1.0 + (p - 1) * r
        if tail <= 0.0:
            raise ValueError(
                f"equicorrelation r={r} is not positive definite at p={p}"
            )
        alpha = math.sqrt(1.0 - r)
        beta = (math.sqrt(tail) - alpha) / p
        return alpha * z + beta * z.sum(axis=1, keepdims=True)
    rho = cfg.rho
    X = np.empty_like(z)
    X[:, 0] = z[:, 0]
    c = math.sqrt(1.0 - rho * rho)
    for j in range(1, p):
        X[:, j] = rho * X[:, j - 1] + c * z[:, j]
    return X


def gen_design(cfg: SimConfig, replicate_seed: int) -> DesignProblem:
    """Generate one replicate: X from the design law, y from the truth.

    Recovery studies rescale every column to unit norm and take y = X beta0
    exactly; selection studies keep raw columns and add Gaussian noise.
    """
    rng = np.random.default_rng([cfg.seed, replicate_seed])
    X = _sample_rows(cfg, rng, cfg.n)
    if cfg.rescale_columns:
        X = X / np.linalg.norm(X, axis=0)
    beta0 = cfg.beta0_full()
    y = X @ beta0
    if cfg.sigma > 0:
        y = y + cfg.sigma * rng.standard_normal(cfg.n)
    return DesignProblem(X, y, beta0)


def covariance_matrix(cfg: SimConfig) -> np.ndarray:
    """Population covariance of one design row."""
    p = cfg.p
    if cfg.correlation == "equicorrelated":
        S = np.full((p, p), cfg.r)
        np.fill_diagonal(S, 1.0)
        return S
    return cfg.rho ** np.abs(np.subtract.outer(np.arange(p), np.arange(p)))


@dataclass
class MetricsRow:
    method: str
    replicate: int
    pe: float
    num_selected: int
    false_negatives: int
    success: bool


def evaluate_estimate(
    method: str,
    replicate: int,
    beta_hat: np.ndarray,
    problem: DesignProblem,
    pe: float = math.nan,
    success_tol: float = 1e-4,
) -> MetricsRow:
    """Score one estimate against the replicate's ground truth."""
    supp = set(int(j) for j in np.flatnonzero(beta_hat))
    true = set(problem.support0 or ())
    fn = len(true - supp)
    exact = supp == true and float(
        np.max(np.abs(beta_hat - problem.beta0))
    ) <= success_tol
    return MetricsRow(method, replicate, pe, len(supp), fn, bool(exact))


def success_rate(rows: Sequence[MetricsRow]) -> float:
    """Percentage of replicates with exact recovery."""
    if not rows:
        return 0.0
    return 100.0 * sum(r.success for r in rows) / len(rows)


def prediction_error(beta_hat: np.ndarray, cfg: SimConfig, test_seed: int) -> float:
    """Held-out squared error on a fresh sample from the design law."""
    rng = np.random.default_rng([cfg.seed, 0x7E57, test_seed])
    X = _sample_rows(cfg, rng, cfg.test_size)
    beta0 = cfg.beta0_full()
    y = X @ beta0 + cfg.sigma * rng.standard_normal(cfg.test_size)
    resid = y - X @ np.asarray(beta_hat, dtype=float)
    return float(np.mean(resid * resid))


def expected_prediction_error(beta_hat: np.ndarray, cfg: SimConfig) -> float:
    """Population value sigma^2 + (bhat - beta0)' Sigma (bhat - beta0)."""
    delta = np.asarray(beta_hat, dtype=float) - cfg.beta0_full()
    if cfg.correlation == "equicorrelated":
        quad = (1.0 - cfg.r) * float(delta @ delta) + cfg.r * float(np.sum(delta)) ** 2
    else:
        quad = float(delta @ covariance_matrix(cfg) @ delta)
    return cfg.sigma**2 + quad


def default_lambda_grid(problem: DesignProblem, big_lambda: float = 1.0, num: int = 50) -> np.ndarray:
    """Log-spaced grid from the smallest level zeroing the lasso down 3 decades."""
    lam_max = float(np.max(np.abs(problem.X.T @ problem.y))) / big_lambda
    return np.geomspace(lam_max, 1e-3 * lam_max, num)


def _family_grid(pen_family: str, a_grid: Optional[Sequence[float]]) -> tuple[float, ...]:
    if pen_family in (pen_mod.L1,):
        return (math.inf,)
    if a_grid is not None:
        return tuple(a_grid)
    if pen_family == pen_mod.SICA:
        return LLA_A_GRID
    if pen_family == pen_mod.SCAD:
        return SCAD_A_GRID
    if pen_family == pen_mod.MCP:
        return MCP_A_GRID
    return LLA_A_GRID


def _lasso_path(problem: DesignProblem, lambda_grid, big_lambda: float) -> list[np.ndarray]:
    """Plain-lasso solutions along a decreasing grid, warm-started."""
    X, y, p = problem.X, problem.y, problem.p
    ones = np.ones(p)
    path = []
    beta = np.zeros(p)
    for lam in lambda_grid:
        beta = weighted_lasso(X, y, ones, big_lambda * lam, beta0=beta)
        path.append(beta.copy())
    return path


def _fit_grid(
    problem: DesignProblem,
    pen_family: str,
    lambda_grid: Sequence[float],
    a_grid: Optional[Sequence[float]],
    big_lambda: float = 1.0,
    lla_steps: int = 1,
):
    """Yield (fit, lam, a) over the whole tuning grid, warm-started per a.

    lla_steps=1 is the one-step estimator the reference tables were produced
    with; pass a larger cap for the fully converged reweighting. Duplicate
    grid entries collapse to one candidate.
    """
    lambda_grid = sorted({float(l) for l in lambda_grid})[::-1]
    path = _lasso_path(problem, lambda_grid, big_lambda)
    for a in _family_grid(pen_family, a_grid):
        for lam, lasso_beta in zip(lambda_grid, path):
            pen = PenaltySpec(pen_family, a=a, lam=lam, big_lambda=big_lambda)
            fit = lla_fit(problem, pen, lam, init=lasso_beta, max_outer=lla_steps)
            yield fit, lam, a


def bic_score(problem: DesignProblem, fit: SelectionFit) -> float:
    """n log(RSS/n) + #S log n, invalid (inf) when the fit saturates."""
    n = problem.n
    k = fit.num_selected
    if k >= n:
        return math.inf
    resid = problem.y - problem.X @ fit.beta_hat
    rss = float(resid @ resid)
    if rss <= 0.0:
        return -math.inf if k == 0 else math.inf
    return n * math.log(rss / n) + k * math.log(n)


def bic_select(
    problem: DesignProblem,
    pen_family: str,
    lambda_grid: Sequence[float],
    a_grid: Optional[Sequence[float]] = None,
    big_lambda: float = 1.0,
    return_table: bool = False,
    lla_steps: int = 1,
):
    """Pick the information-criterion minimizer over the tuning grid.

    Ties resolve toward the sparser model, then the larger regularization
    level.
    """
    if len(lambda_grid) == 0:
        raise ValueError("lambda grid is empty")
    best = None
    best_key = None
    table = []
    for fit, lam, a in _fit_grid(
        problem, pen_family, lambda_grid, a_grid, big_lambda, lla_steps
    ):
        score = bic_score(problem, fit)
        table.append({"lambda": lam, "a": a, "bic": score, "num_selected": fit.num_selected})
        key = (score, fit.num_selected, -lam)
        if best_key is None or key < best_key:
            best, best_key = fit, key
    if return_table:
        return best, table
    return best


def _fold_assignments(n: int, folds: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng([seed, 0xF01D])
    perm = rng.permutation(n)
    assign = np.empty(n, dtype=int)
    for i, idx in enumerate(perm):
        assign[idx] = i % folds
    return assign


def cv_select(
    problem: DesignProblem,
    pen_family: str,
    lambda_grid: Sequence[float],
    a_grid: Optional[Sequence[float]] = None,
    folds: int = 5,
    seed: int = 0,
    big_lambda: float = 1.0,
    return_table: bool = False,
    lla_steps: int = 1,
):
    """Tune by k-fold cross-validated prediction error, then refit in full."""
    if folds < 2 or problem.n < folds:
        raise ValueError("need 2 <= folds <= n")
    if len(lambda_grid) == 0:
        raise ValueError("lambda grid is empty")
    lambda_grid = sorted({float(l) for l in lambda_grid})[::-1]
    a_values = _family_grid(pen_family, a_grid)
    assign = _fold_assignments(problem.n, folds, seed)

    sse = {(a, lam): 0.0 for a in a_values for lam in lambda_grid}
    for k in range(folds):
        train = assign != k
        test = ~train
        sub = DesignProblem(problem.X[train], problem.y[train])
        Xte, yte = problem.X[test], problem.y[test]
        for fit, lam, a in _fit_grid(
            sub, pen_family, lambda_grid, a_grid, big_lambda, lla_steps
        ):
            resid = yte - Xte @ fit.beta_hat
            sse[(a, lam)] += float(resid @ resid)

    best_key = min(sse, key=lambda k_: (sse[k_], -k_[1]))
    a_best, lam_best = best_key
    pen = PenaltySpec(pen_family, a=a_best, lam=lam_best, big_lambda=big_lambda)
    fit = lla_fit(problem, pen, lam_best, max_outer=lla_steps)
    if return_table:
        table = [
            {"lambda": lam, "a": a, "cv_error": sse[(a, lam)] / problem.n}
            for (a, lam) in sse
        ]
        return fit, table
    return fit


# ---------------------------------------------------------------------------
# replication driver

RECOVERY_METHODS = ("sirs", "sirs:a=inf", "sirs:a=5", "sirs:a=1", "sirs:a=0.3")
SELECTION_METHODS = ("l1:bic", "scad:bic", "mcp:bic", "sica:bic")


def _run_recovery_method(method: str, problem: DesignProblem, cfg: SimConfig):
    sirs_cfg = SirsConfig()
    if method == "sirs":
        return sirs_auto(problem, sirs_cfg).beta_hat
    if method.startswith("sirs:a="):
        a = float(method.split("=", 1)[1])
        return sirs_recover(problem, sirs_cfg.resolve(problem.n, problem.p), a).beta_hat
    raise ValueError(f"unknown recovery method {method!r}")


def _run_selection_method(method: str, problem: DesignProblem, cfg: SimConfig, rep: int):
    family, _, tuner = method.partition(":")
    tuner = tuner or "bic"
    grid = default_lambda_grid(problem)
    if tuner == "bic":
        return bic_select(problem, family, grid).beta_hat
    if tuner == "cv":
        return cv_select(problem, family, grid, folds=5, seed=cfg.seed + rep).beta_hat
    raise ValueError(f"unknown tuner {tuner!r} in method {method!r}")


def run_replicate(cfg: SimConfig, method: str, rep: int) -> MetricsRow:
    problem = gen_design(cfg, rep)
    if cfg.study == "recovery":
        beta_hat = _run_recovery_method(method, problem, cfg)
        pe = math.nan
    else:
        beta_hat = _run_selection_method(method, problem, cfg, rep)
        pe = prediction_error(beta_hat, cfg, rep)
    return evaluate_estimate(method, rep, beta_hat, problem, pe)


@dataclass
class StudyResult:
    config: SimConfig
    rows: list[MetricsRow]
    failures: list[tuple[str, int, str]] = field(default_factory=list)

    def median_summary(self) -> list[dict]:
        out = []
        for method in dict.fromkeys(r.method for r in self.rows):
            sub = [r for r in self.rows if r.method == method]
            out.append(
                {
                    "method": method,
                    "replicates": len(sub),
                    "median_pe": _median([r.pe for r in sub]),
                    "median_num_selected": _median([r.num_selected for r in sub]),
                    "median_fn": _median([r.false_negatives for r in sub]),
                    "success_pct": success_rate(sub),
                }
            )
        return out

    def rows_csv(self) -> str:
        lines = ["method,replicate,pe,num_selected,fn,success"]
        for r in self.rows:
            pe = "" if math.isnan(r.pe) else format(r.pe, ".17g")
            lines.append(
                f"{r.method},{r.replicate},{pe},{r.num_selected},"
                f"{r.false_negatives},{int(r.success)}"
            )
        return "\n".join(lines) + "\n"

    def summary_csv(self) -> str:
        lines = ["method,replicates,median_pe,median_num_selected,median_fn,success_pct"]
        for row in self.median_summary():
            pe = "" if math.isnan(row["median_pe"]) else format(row["median_pe"], ".17g")
            lines.append(
                f"{row['method']},{row['replicates']},{pe},"
                f"{format(row['median_num_selected'], '.17g')},"
                f"{format(row['median_fn'], '.17g')},"
                f"{format(row['success_pct'], '.17g')}"
            )
        return "\n".join(lines) + "\n"


def _median(values: Sequence[float]) -> float:
    vals = [v for v in values if not (isinstance(v, float) and math.isnan(v))]
    if not vals:
        return math.nan
    return float(np.median(vals))


def run_study(cfg: SimConfig, methods: Optional[Sequence[str]] = None) -> StudyResult:
    """Run every method on every replicate; failures are logged, not fatal."""
    if methods is None:
        methods = RECOVERY_METHODS if cfg.study == "recovery" else SELECTION_METHODS
    result = StudyResult(cfg, [])
    for rep in range(cfg.replications):
        for method in methods:
            try:
                result.rows.append(run_replicate(cfg, method, rep))
            except Exception as exc:  # noqa: BLE001 - study must survive one bad draw
                log.warning("replicate %d method %s failed: %s", rep, method, exc)
                result.failures.append((method, rep, str(exc)))
    return result
