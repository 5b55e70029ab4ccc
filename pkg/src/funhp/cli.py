"""Command-line interface.

Exit codes: 0 success, 1 verification failure, 2 usage or input error,
3 degenerate data (no component yields a usable smoothing estimate).
"""

from __future__ import annotations

import argparse
import logging
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .basis import BasisSpec, project_series, reconstruct_series
from .diffop import dense_P, solve_smoother
from .functional_hp import (
    DEFAULT_ALPHA_MAX,
    DiagonalOperator,
    estimate_B,
    estimate_components,
    estimation_report,
    filter_trend,
)
from .io import (
    InputError,
    parse_floats,
    parse_ints,
    read_alpha,
    read_config,
    read_curves,
    read_table,
    write_json,
    write_matrix,
    write_rows,
)
from .model_sim import (
    ModelParams,
    log_grid,
    mc_consistency,
    simulate,
    verify_optimality,
)

logger = logging.getLogger("funhp")

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_DEGENERATE = 0, 1, 2, 3

# desk-scale defaults for the verification commands
DEFAULTS = {
    "model": {"n": "30", "mu": "1 1 4", "tau": "4 1 1", "gamma": "", "seed": "0"},
    "grid": {"lo": "0.01", "hi": "100", "size": "200"},
    "mc": {"n": "100", "mu": "1 0.5 0.25 0.125", "tau": "4 2 1 0.5", "n_list": "100 400 1600", "reps": "300"},
    "basis": {"kind": "sine", "J": "", "m": "256", "grid": "header", "matrix": ""},
    "filter": {"alpha_max": str(DEFAULT_ALPHA_MAX), "alpha_file": "", "estimate": "false"},
    "bench": {"n_list": "1000 10000 100000 1000000", "alpha": "1600", "dense_max": "2000"},
}


class Settings:
    """Config-file values overlaid by command-line flags."""

    def __init__(self, args):
        self.values = {sec: dict(opts) for sec, opts in DEFAULTS.items()}
        if args.config:
            parser = read_config(args.config)
            for sec in parser.sections():
                self.values.setdefault(sec, {}).update(parser[sec])
        for key, value in vars(args).items():
            if "__" in key and value is not None:
                sec, opt = key.split("__", 1)
                self.values.setdefault(sec, {})[opt] = str(value)
        if args.seed is not None:
            self.values["model"]["seed"] = str(args.seed)

    def get(self, section, key):
        return self.values.get(section, {}).get(key, "")

    def floats(self, section, key):
        return parse_floats(self.get(section, key))

    def ints(self, section, key):
        return parse_ints(self.get(section, key))

    def number(self, section, key, kind=float):
        text = self.get(section, key).strip()
        try:
            return kind(float(text)) if kind is int else kind(text)
        except ValueError:
            raise InputError(f"[{section}] {key}: cannot parse {text!r}") from None

    def flag(self, section, key):
        return self.get(section, key).strip().lower() in {"1", "true", "yes", "on"}


def _model_params(settings, section="model", n=None):
    mu = settings.floats(section, "mu")
    tau = settings.floats(section, "tau")
    gamma_text = settings.get("model", "gamma").strip()
    gamma = None
    if gamma_text:
        g = parse_floats(gamma_text)
        if len(g) != 2 * len(mu):
            raise InputError(f"gamma needs 2*J = {2 * len(mu)} values, got {len(g)}")
        gamma = np.array(g).reshape(2, len(mu))
    try:
        return ModelParams(
            n=n if n is not None else settings.number(section, "n", int),
            mu=mu,
            tau=tau,
            gamma=gamma,
            seed=settings.number("model", "seed", int),
        )
    except ValueError as exc:
        raise InputError(f"invalid model parameters: {exc}") from None


def _basis(settings, grid, m=None):
    kind = settings.get("basis", "kind").strip() or "sine"
    try:
        if kind == "matrix":
            path = settings.get("basis", "matrix").strip()
            if not path:
                raise InputError("basis kind 'matrix' needs --basis-matrix")
            return BasisSpec.from_matrix(np.array(read_table(path)), grid)
        if kind != "sine":
            raise InputError(f"unknown basis kind {kind!r}")
        J_text = settings.get("basis", "J").strip()
        if not J_text:
            raise InputError("truncation level J is required (--J)")
        return BasisSpec.sine(int(J_text), grid)
    except InputError:
        raise
    except ValueError as exc:
        raise InputError(f"invalid basis: {exc}") from None


def _manifest(args, settings, outputs, extra=None):
    manifest = {
        "command": args.command,
        "argv": args.argv,
        "settings": settings.values,
        "seed": settings.get("model", "seed"),
        "versions": {
            "funhp": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "outputs": sorted(outputs),
    }
    if extra:
        manifest.update(extra)
    return manifest


def _output_dir(args) -> Path:
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise InputError(f"output directory is not writable: {out}")
    return out


def cmd_simulate(args, settings):
    params = _model_params(settings)
    m = settings.number("basis", "m", int)
    try:
        spec = BasisSpec.sine(params.J, m)
    except ValueError as exc:
        raise InputError(f"invalid basis: {exc}") from None
    sim = simulate(params, rep=args.rep)
    out = _output_dir(args)
    written = []
    for name in ("X", "Y", "U", "V"):
        coef = getattr(sim, name)
        write_matrix(out / f"{name}.csv", reconstruct_series(coef, spec), header=spec.grid)
        write_matrix(out / f"{name}_coef.csv", coef)
        written += [f"{name}.csv", f"{name}_coef.csv"]
    write_json(out / "truth.json", {**params.to_dict(), "alpha": params.alpha, "rep": args.rep, "basis": spec.to_dict()})
    written.append("truth.json")
    write_json(out / "manifest.json", _manifest(args, settings, written + ["manifest.json"]))
    logger.info("wrote %d files to %s", len(written) + 1, out)
    return EXIT_OK


def _load_coefficients(args, settings):
    path = settings.get("io", "input").strip()
    if not path:
        raise InputError("an input curve file is required (--input)")
    grid, values = read_curves(path, settings.get("basis", "grid").strip() or "header")
    spec = _basis(settings, grid)
    try:
        X = project_series(values, spec)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None
    if X.shape[0] < 5:
        raise InputError(f"{path}: need at least 5 curves, got {X.shape[0]}")
    return spec, X


def _all_degenerate(ests):
    return all(e.status == "tau_degenerate" for e in ests)


def cmd_estimate(args, settings):
    spec, X = _load_coefficients(args, settings)
    alpha_max = settings.number("filter", "alpha_max")
    B, ests = estimate_B(X, alpha_max=alpha_max, max_workers=args.threads)
    out = _output_dir(args)
    report = estimation_report(ests, spec.to_dict())
    report["alpha_used"] = B.eigenvalues
    write_json(out / "estimation_report.json", report)
    write_json(out / "manifest.json", _manifest(args, settings, ["estimation_report.json", "manifest.json"]))
    if _all_degenerate(ests):
        logger.error("every component is tau_degenerate; no usable smoothing estimate")
        return EXIT_DEGENERATE
    return EXIT_OK


def cmd_filter(args, settings):
    spec, X = _load_coefficients(args, settings)
    alpha_max = settings.number("filter", "alpha_max")
    alpha_file = settings.get("filter", "alpha_file").strip()
    use_estimate = settings.flag("filter", "estimate")
    if bool(alpha_file) == use_estimate:
        raise InputError("give exactly one of --alpha FILE or --estimate")
    B_est, ests = estimate_B(X, alpha_max=alpha_max, max_workers=args.threads)
    if use_estimate:
        B = B_est
        status = [e.status for e in ests]
    else:
        alpha = read_alpha(alpha_file)
        if alpha.size != spec.J:
            raise InputError(f"{alpha_file}: expected {spec.J} smoothing parameters, got {alpha.size}")
        B = DiagonalOperator(alpha, "B")
        status = None
    result = filter_trend(X, B, status=status, max_workers=args.threads)
    out = _output_dir(args)
    write_matrix(out / "trend.csv", reconstruct_series(result.trend, spec), header=spec.grid)
    write_matrix(out / "residual.csv", reconstruct_series(result.residual, spec), header=spec.grid)
    write_matrix(out / "trend_coef.csv", result.trend)
    write_matrix(out / "residual_coef.csv", result.residual)
    report = estimation_report(ests, spec.to_dict())
    report["alpha_used"] = result.per_component_alpha
    report["alpha_source"] = "estimate" if use_estimate else str(alpha_file)
    write_json(out / "estimation_report.json", report)
    files = ["trend.csv", "residual.csv", "trend_coef.csv", "residual_coef.csv", "estimation_report.json"]
    write_json(out / "manifest.json", _manifest(args, settings, files + ["manifest.json"]))
    if use_estimate and _all_degenerate(ests):
        logger.error("every component is tau_degenerate; trend used alpha_max=%g throughout", alpha_max)
        return EXIT_DEGENERATE
    return EXIT_OK


def _grid(settings):
    size = settings.number("grid", "size", int)
    lo, hi = settings.number("grid", "lo"), settings.number("grid", "hi")
    if size < 1:
        raise InputError("alpha grid is empty (grid size must be >= 1)")
    if not 0 < lo <= hi:
        raise InputError(f"alpha grid bounds must satisfy 0 < lo <= hi, got lo={lo}, hi={hi}")
    return log_grid(lo, hi, size)


def _run_optimality(settings, out):
    params = _model_params(settings)
    report = verify_optimality(params, _grid(settings))
    curves = report.pop("curves")
    alphas = report.pop("alphas")
    rows = [{"alpha": float(a), **{f"risk_{j + 1}": float(v) for j, v in enumerate(r)}} for a, r in zip(alphas, curves)]
    write_rows(out / "risk_curve.csv", ["alpha"] + [f"risk_{j + 1}" for j in range(params.J)], rows)
    return report, ["risk_curve.csv"]


def _run_mc(settings, out, threads):
    params = _model_params(settings, section="mc")
    n_list = settings.ints("mc", "n_list")
    reps = settings.number("mc", "reps", int)
    if reps < 2 or not n_list:
        raise InputError("mc-consistency needs reps >= 2 and a non-empty n_list")
    try:
        report = mc_consistency(params, n_list, reps, settings.number("filter", "alpha_max"), max_workers=threads)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    rows = []
    for r in report["rows"]:
        for c in r["components"]:
            rows.append({"n": r["n"], **c, "median_max_alpha_err": r["median_max_alpha_err"]})
    write_rows(out / "consistency.csv", list(rows[0]), rows)
    return report, ["consistency.csv"]


def cmd_verify_optimality(args, settings):
    out = _output_dir(args)
    report, files = _run_optimality(settings, out)
    write_json(out / "verdict.json", report)
    write_json(out / "manifest.json", _manifest(args, settings, files + ["verdict.json", "manifest.json"]))
    return EXIT_OK if report["passed"] else EXIT_FAILED


def cmd_mc_consistency(args, settings):
    out = _output_dir(args)
    report, files = _run_mc(settings, out, args.threads)
    write_json(out / "verdict.json", report)
    write_json(out / "manifest.json", _manifest(args, settings, files + ["verdict.json", "manifest.json"]))
    return EXIT_OK if report["passed"] else EXIT_FAILED


def cmd_verify(args, settings):
    out = _output_dir(args)
    opt, f1 = _run_optimality(settings, out)
    mc, f2 = _run_mc(settings, out, args.threads)
    verdict = {
        "checks": {"optimality": opt["passed"], "consistency": mc["passed"]},
        "optimality": opt,
        "consistency": mc,
    }
    verdict["passed"] = all(verdict["checks"].values())
    write_json(out / "verdict.json", verdict)
    write_json(out / "manifest.json", _manifest(args, settings, f1 + f2 + ["verdict.json", "manifest.json"]))
    for name, ok in verdict["checks"].items():
        logger.info("%-12s %s", name, "PASS" if ok else "FAIL")
    return EXIT_OK if verdict["passed"] else EXIT_FAILED


def _best_time(func, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        func()
        best = min(best, time.perf_counter() - t0)
    return best


def cmd_bench(args, settings):
    n_list = settings.ints("bench", "n_list")
    alpha = settings.number("bench", "alpha")
    dense_max = settings.number("bench", "dense_max", int)
    if not n_list or min(n_list) < 3:
        raise InputError("bench needs n_list values >= 3")
    rng = np.random.default_rng(settings.number("model", "seed", int))
    rows = []
    for n in n_list:
        x = rng.standard_normal(n)
        t = _best_time(lambda: solve_smoother(x, alpha))
        rows.append({"n": n, "method": "banded", "wall_time": t, "throughput": n / t, "max_rel_diff": ""})
        if n <= dense_max:
            Pd = dense_P(n)
            A = np.eye(n) + alpha * (Pd.T @ Pd)
            t_dense = _best_time(lambda: np.linalg.solve(A, x))
            dense = np.linalg.solve(A, x)
            banded = solve_smoother(x, alpha)
            diff = float(np.linalg.norm(banded - dense) / np.linalg.norm(dense))
            rows.append({"n": n, "method": "dense", "wall_time": t_dense, "throughput": n / t_dense, "max_rel_diff": diff})
    out = _output_dir(args)
    write_rows(out / "bench.csv", ["n", "method", "wall_time", "throughput", "max_rel_diff"], rows)
    machine = {
        "platform": platform.platform(),
        "processor": platform.processor() or platform.machine(),
        "cpu_count": os.cpu_count(),
    }
    write_json(out / "bench.json", {"alpha": alpha, "machine": machine, "rows": rows})
    write_json(out / "manifest.json", _manifest(args, settings, ["bench.csv", "bench.json", "manifest.json"], {"machine": machine}))
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "filter": cmd_filter,
    "verify-optimality": cmd_verify_optimality,
    "mc-consistency": cmd_mc_consistency,
    "verify": cmd_verify,
    "bench": cmd_bench,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [model], [grid], [mc], [basis], [filter], [bench] sections")
    common.add_argument("--seed", type=int, help="RNG seed (overrides [model] seed)")
    common.add_argument("--threads", type=int, default=None, help="worker threads for per-component / per-rep work")
    common.add_argument("--output", default="out", help="output directory (default: ./out)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="funhp", description="Functional Hodrick-Prescott filter toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def model_flags(p, section="model"):
        p.add_argument("--n", dest=f"{section}__n", type=int, help="series length")
        p.add_argument("--mu", dest=f"{section}__mu", help="noise eigenvalues, e.g. '1 0.5'")
        p.add_argument("--tau", dest=f"{section}__tau", help="signal eigenvalues, e.g. '4 2'")

    def input_flags(p):
        p.add_argument("--input", dest="io__input", help="curve CSV (one curve per row)")
        p.add_argument("--grid", dest="basis__grid", choices=["header", "uniform"], help="grid from header row or implicit uniform")
        p.add_argument("--J", dest="basis__J", type=int, help="basis truncation level")
        p.add_argument("--basis", dest="basis__kind", choices=["sine", "matrix"])
        p.add_argument("--basis-matrix", dest="basis__matrix", help="CSV with the m x J basis table")
        p.add_argument("--alpha-max", dest="filter__alpha_max", type=float, help="cap used for tau_degenerate components")

    p = sub.add_parser("simulate", parents=[common], help="simulate curves from the mixed model")
    model_flags(p)
    p.add_argument("--gamma", dest="model__gamma", help="2*J kernel coordinates, row-major")
    p.add_argument("--m", dest="basis__m", type=int, help="grid points per curve")
    p.add_argument("--rep", type=int, default=0, help="replicate index")

    p = sub.add_parser("estimate", parents=[common], help="estimate the smoothing operator")
    input_flags(p)

    p = sub.add_parser("filter", parents=[common], help="extract the functional HP trend")
    input_flags(p)
    p.add_argument("--alpha", dest="filter__alpha_file", help="CSV of J smoothing parameters")
    p.add_argument("--estimate", dest="filter__estimate", action="store_const", const="true", help="use the estimated operator")

    for name in ("verify-optimality", "verify"):
        p = sub.add_parser(name, parents=[common], help="risk-curve optimality check" if name != "verify" else "run the full verification suite")
        model_flags(p)
        p.add_argument("--grid-lo", dest="grid__lo", type=float)
        p.add_argument("--grid-hi", dest="grid__hi", type=float)
        p.add_argument("--grid-size", dest="grid__size", type=int)
        if name == "verify":
            p.add_argument("--n-list", dest="mc__n_list")
            p.add_argument("--reps", dest="mc__reps", type=int)

    p = sub.add_parser("mc-consistency", parents=[common], help="Monte Carlo consistency of the estimators")
    model_flags(p, "mc")
    p.add_argument("--n-list", dest="mc__n_list", help="increasing series lengths, e.g. '100 400 1600'")
    p.add_argument("--reps", dest="mc__reps", type=int)

    p = sub.add_parser("bench", parents=[common], help="time the banded smoother against a dense solve")
    p.add_argument("--n-list", dest="bench__n_list")
    p.add_argument("--alpha", dest="bench__alpha", type=float)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    args.argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        settings = Settings(args)
        return COMMANDS[args.command](args, settings)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
