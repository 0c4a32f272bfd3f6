"""Command-line surface: recovery, selection, certification, penalty tables,
study reproduction, and the diabetes benchmark, with CSV/JSON I/O.

Exit codes: 0 success, 1 input/parse error, 2 recovery not sparse enough,
3 resource limit (certification support too large).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict

import numpy as np

from . import certify as certify_mod
from . import experiment as exp_mod
from . import penalty as pen_mod
from .linalg import DesignProblem, read_matrix, read_vector, write_matrix
from .lla import lla_fit, zestimator_check
from .penalty import PenaltySpec
from .sirs import SirsConfig, sirs_auto

_FLOAT_FMT = ".17g"


def _json_default(o):
    if isinstance(o, np.ndarray):
        return [float(v) for v in o.ravel()]
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o)!r}")


def _dump_json(obj, path, to_stdout: bool):
    text = json.dumps(obj, indent=2, default=_json_default)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    if to_stdout or not path:
        print(text)


def _err(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return 1


def _parse_grid(text: str) -> tuple[float, ...]:
    vals = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        vals.append(math.inf if tok in ("inf", "Inf", "INF") else float(tok))
    if not vals:
        raise ValueError("empty grid")
    return tuple(vals)


def _env_seed(explicit) -> int:
    if explicit is not None:
        return explicit
    env = os.environ.get("SICA_SEED")
    return int(env) if env else 0


def _load_xy(args):
    X = read_matrix(args.X)
    y = read_vector(args.y)
    return X, y


def _penalty_from_args(args, lam: float = 0.0) -> PenaltySpec:
    return PenaltySpec(args.penalty, a=args.a, lam=lam, big_lambda=args.big_lambda)


def cmd_recover(args) -> int:
    try:
        X, y = _load_xy(args)
        problem = DesignProblem(X, y)
    except ValueError as exc:
        return _err(str(exc))
    resid = np.linalg.norm(y - X @ np.linalg.lstsq(X, y, rcond=None)[0])
    if resid > 1e-6 * max(np.linalg.norm(y), 1e-300):
        print(
            f"warning: y is outside range(X) (relative residual {resid:.3g}); proceeding",
            file=sys.stderr,
        )
    cfg = SirsConfig(
        sparsity_budget=args.sparsity,
        max_iters=args.max_iters,
        max_restarts=args.restarts,
        floor_constant=args.floor,
        a_grid=args.a_grid,
        converge_tol=args.converge_tol,
        hard_threshold=args.hard_threshold,
    )
    res = sirs_auto(problem, cfg)
    out = {
        "a_used": res.a_used,
        "support": list(res.support),
        "num_nonzero": res.num_nonzero,
        "restarts_used": res.restarts_used,
        "iterations": res.iterations,
        "converged": res.converged,
        "sparse_enough": res.sparse_enough,
        "beta_hat": res.beta_hat,
    }
    _dump_json(out, args.out, args.stdout)
    if args.beta_out:
        write_matrix(args.beta_out, res.beta_hat)
    return 0 if res.sparse_enough else 2


def cmd_select(args) -> int:
    try:
        X, y = _load_xy(args)
        problem = DesignProblem(X, y)
    except ValueError as exc:
        return _err(str(exc))
    a_grid = args.a_grid
    if args.lam is not None:
        pen = _penalty_from_args(args, args.lam)
        fit = lla_fit(problem, pen, args.lam)
        table = []
    else:
        grid = (
            _parse_grid(args.lambda_grid)
            if args.lambda_grid
            else exp_mod.default_lambda_grid(problem, args.big_lambda)
        )
        if args.tune == "bic":
            fit, table = exp_mod.bic_select(
                problem, args.penalty, grid, a_grid, args.big_lambda, return_table=True
            )
        else:
            fit, table = exp_mod.cv_select(
                problem, args.penalty, grid, a_grid,
                folds=args.folds, seed=_env_seed(args.seed),
                big_lambda=args.big_lambda, return_table=True,
            )
    try:
        cert = zestimator_check(problem, fit)
        cert_out = {
            "stationarity_residual": cert.stationarity_residual,
            "inactive_margin": cert.inactive_margin,
            "eigenvalue_margin": cert.eigenvalue_margin,
            "ok": bool(cert.ok),
        }
    except Exception as exc:  # noqa: BLE001 - certificate is advisory here
        cert_out = {"error": str(exc)}
    out = {
        "penalty": fit.pen.family,
        "a": fit.pen.a,
        "lambda": fit.lam,
        "big_lambda": fit.pen.big_lambda,
        "support": list(fit.support),
        "num_selected": fit.num_selected,
        "outer_iters": fit.outer_iters,
        "kkt_max_violation": fit.kkt_max_violation,
        "objective": fit.objective,
        "stationarity": cert_out,
        "ic_table": table,
        "beta_hat": fit.beta_hat,
    }
    _dump_json(out, args.out, args.stdout)
    if args.beta_out:
        write_matrix(args.beta_out, fit.beta_hat)
    return 0


def cmd_certify(args) -> int:
    try:
        X = read_matrix(args.X)
        beta0 = read_vector(args.beta0)
        problem = DesignProblem(X, X @ beta0, beta0)
    except ValueError as exc:
        return _err(str(exc))
    eps = args.epsilon
    try:
        if args.aopt:
            value = certify_mod.a_opt(problem, eps)
            out = {"a_opt": ("inf" if math.isinf(value) else value), "epsilon_box": eps}
        elif args.audit:
            sigma, u_n, c0, capc = (float(v) for v in args.audit.split(","))
            pen = _penalty_from_args(args)
            audit = certify_mod.weak_oracle_audit(problem, pen, sigma, u_n, c0, capc)
            out = asdict(audit)
        else:
            pen = _penalty_from_args(args)
            cert = certify_mod.recovery_condition(problem, pen, eps)
            out = asdict(cert)
    except certify_mod.SupportTooLargeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, certify_mod.AuditUnavailableError) as exc:
        return _err(str(exc))
    _dump_json(out, args.out, args.stdout)
    return 0


def cmd_penalty_table(args) -> int:
    pen = _penalty_from_args(args, args.lam)
    ts = np.linspace(0.0, args.t_max, args.points)
    try:
        rows = np.column_stack(
            [ts, pen_mod.rho(pen, ts), pen_mod.rho_prime(pen, ts)]
        )
    except pen_mod.UnsupportedDerivativeError:
        rows = np.column_stack([ts, pen_mod.rho(pen, ts)])
    if args.out:
        write_matrix(args.out, rows)
    else:
        for row in rows:
            print(",".join(format(v, _FLOAT_FMT) for v in row))
    return 0


def cmd_simulate(args) -> int:
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg = exp_mod.SimConfig.from_json(fh.read())
    except (OSError, ValueError, TypeError) as exc:
        return _err(f"config: {exc}")
    if args.seed is not None or os.environ.get("SICA_SEED"):
        cfg.seed = _env_seed(args.seed)
    methods = _parse_methods(args.methods) if args.methods else None
    result = exp_mod.run_study(cfg, methods)
    os.makedirs(args.out_dir, exist_ok=True)
    rows_path = os.path.join(args.out_dir, "rows.csv")
    summary_path = os.path.join(args.out_dir, "summary.csv")
    with open(rows_path, "w", encoding="utf-8") as fh:
        fh.write(result.rows_csv())
    with open(summary_path, "w", encoding="utf-8") as fh:
        fh.write(result.summary_csv())
    if args.stdout:
        print(result.summary_csv(), end="")
    for method, rep, msg in result.failures:
        print(f"warning: {method} replicate {rep} failed: {msg}", file=sys.stderr)
    return 0


def _parse_methods(text: str) -> list[str]:
    return [m.strip() for m in text.split(",") if m.strip()]


DIABETES_COLUMNS = ("age", "sex", "bmi", "bp", "tc", "ldl", "hdl", "tch", "ltg", "glu")


def _standardize(X: np.ndarray, y: np.ndarray):
    xm = X.mean(axis=0)
    xs = X.std(axis=0, ddof=1)
    ym = y.mean()
    return (X - xm) / xs, y - ym


def _adjusted_r2(y: np.ndarray, fitted: np.ndarray, df: int) -> float:
    n = y.shape[0]
    rss = float(np.sum((y - fitted) ** 2))
    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - rss / tss
    return 1.0 - (1.0 - r2) * (n - 1) / (n - df - 1)


def cmd_diabetes(args) -> int:
    try:
        M = read_matrix(args.data)
    except ValueError as exc:
        return _err(str(exc))
    if M.shape != (442, 11):
        return _err(f"expected a 442x11 table (10 predictors + response), got {M.shape}")
    Xraw, yraw = M[:, :10], M[:, 10]
    folds = args.folds
    rng_seed = _env_seed(args.seed)

    lines = ["method," + ",".join(DIABETES_COLUMNS) + ",r2_adj,ape"]
    report = {}
    for family in ("l1", "scad", "mcp", "sica"):
        X, y = _standardize(Xraw, yraw)
        problem = DesignProblem(X, y)
        grid = exp_mod.default_lambda_grid(problem)
        fit, _ = exp_mod.cv_select(
            problem, family, grid, folds=folds, seed=rng_seed, return_table=True
        )
        r2a = _adjusted_r2(y, X @ fit.beta_hat, fit.num_selected)
        ape = _diabetes_ape(Xraw, yraw, family, fit.lam, fit.pen.a, folds, rng_seed)
        coefs = ",".join(format(v, ".6g") for v in fit.beta_hat)
        lines.append(f"{family},{coefs},{format(100*r2a, '.4g')}%,{format(ape, '.6g')}")
        report[family] = {
            "support": [DIABETES_COLUMNS[j] for j in fit.support],
            "r2_adj_pct": 100 * r2a,
            "ape": ape,
        }
    table = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(table)
    if args.stdout or not args.out:
        print(table, end="")
    print(json.dumps(report, indent=2, default=_json_default), file=sys.stderr)
    return 0


def _diabetes_ape(Xraw, yraw, family, lam, a, folds, seed) -> float:
    """Cross-validated squared prediction error on the raw response scale."""
    n = Xraw.shape[0]
    rng = np.random.default_rng([seed, 0xD1AB])
    perm = rng.permutation(n)
    assign = np.empty(n, dtype=int)
    for i, idx in enumerate(perm):
        assign[idx] = i % folds
    sse = 0.0
    for k in range(folds):
        tr = assign != k
        te = ~tr
        xm = Xraw[tr].mean(axis=0)
        xs = Xraw[tr].std(axis=0, ddof=1)
        ym = yraw[tr].mean()
        Xtr = (Xraw[tr] - xm) / xs
        pen = PenaltySpec(family, a=a, lam=lam)
        fit = lla_fit(DesignProblem(Xtr, yraw[tr] - ym), pen, lam)
        pred = ((Xraw[te] - xm) / xs) @ fit.beta_hat + ym
        sse += float(np.sum((yraw[te] - pred) ** 2))
    return sse / n


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sicareg",
        description="Concave-penalized least squares: sparse recovery, model "
        "selection, and recoverability certificates.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def add_common_out(p):
        p.add_argument("--out", help="output JSON path")
        p.add_argument("--stdout", action="store_true", help="echo data to stdout")

    def add_penalty(p, default="sica"):
        p.add_argument("--penalty", default=default,
                       choices=["sica", "l1", "scad", "mcp", "log"])
        p.add_argument("--a", type=float, default=1.0, help="penalty shape parameter")
        p.add_argument("--big-lambda", dest="big_lambda", type=float, default=1.0)

    p = sub.add_parser("recover", help="sparse recovery of y = X b")
    p.add_argument("X")
    p.add_argument("y")
    p.add_argument("--a-grid", dest="a_grid", type=_parse_grid, default=None)
    p.add_argument("--sparsity", type=int, default=None, help="target support size")
    p.add_argument("--max-iters", type=int, default=50)
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--floor", type=float, default=None)
    p.add_argument("--converge-tol", type=float, default=1e-8)
    p.add_argument("--hard-threshold", type=float, default=1e-6)
    p.add_argument("--beta-out", help="write the estimate as CSV")
    add_common_out(p)
    p.set_defaults(func=cmd_recover, a_grid=None)

    p = sub.add_parser("select", help="penalized model selection")
    p.add_argument("X")
    p.add_argument("y")
    add_penalty(p)
    p.add_argument("--tune", choices=["bic", "cv"], default="bic")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="fit a single regularization level instead of tuning")
    p.add_argument("--lambda-grid", dest="lambda_grid", default=None,
                   help="comma-separated levels")
    p.add_argument("--a-grid", dest="a_grid", type=_parse_grid, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--beta-out", help="write the estimate as CSV")
    add_common_out(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("certify", help="recoverability and oracle certificates")
    p.add_argument("X")
    p.add_argument("beta0")
    p.add_argument("--epsilon", type=float, default=1e-3)
    add_penalty(p)
    p.add_argument("--aopt", action="store_true",
                   help="compute the optimal shape parameter")
    p.add_argument("--audit", default=None, metavar="SIGMA,U_N,C0,C",
                   help="run the weak-oracle audit")
    add_common_out(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("penalty-table", help="tabulate rho and rho' on a grid")
    add_penalty(p)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--t-max", dest="t_max", type=float, default=5.0)
    p.add_argument("--points", type=int, default=51)
    p.add_argument("--out", help="output CSV path")
    p.set_defaults(func=cmd_penalty_table, stdout=True)

    p = sub.add_parser("simulate", help="run a replication study from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--methods", default=None,
                   help="comma-separated method names (default per study)")
    p.add_argument("--out-dir", dest="out_dir", default=".")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--stdout", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("diabetes", help="coefficient table for the 442-row benchmark")
    p.add_argument("data", help="442x11 CSV: 10 predictors then the response")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", help="output CSV path")
    p.add_argument("--stdout", action="store_true")
    p.set_defaults(func=cmd_diabetes)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        return _err(f"{exc.filename}: file not found")


if __name__ == "__main__":
    sys.exit(main())
