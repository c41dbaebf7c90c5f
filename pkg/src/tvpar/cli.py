"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .arp import adf_fit, ar_p_inference, full_sample_residuals, ljung_box, local_residuals, make_window_p
from .bandwidth import empirical_nh_grid, select_bandwidth, simulation_nh_grid
from .critical import TABLE_ALPHAS, TABLE_PSI, simulate_quantiles, write_table
from .data import load_series
from .exceptions import ConfigError, DataError, GridClampedWarning, NumericalError, TvparError
from .inference import default_rho0_grid
from .local import local_fit
from .pipeline import RunConfig, analyze, format_trajectory_csv, load_table, trajectory_rows
from .simulation import (StudyConfig, full_catalog, parse_dgp, run_study, write_metrics_csv,
                         write_raw_csv)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4
FULL_REPS = 5000


def parse_int_list(text: str) -> list:
    """Comma-separated integers; ``a:b:s`` expands to ``a, a+s, ..., <= b``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            a, b, s = (int(x) for x in part.split(":"))
            out.extend(range(a, b + 1, s))
        else:
            out.append(int(part))
    return out


def parse_float_list(text: str) -> list:
    return [float(x) for x in text.split(",") if x.strip()]


def _nh_grid(text: Optional[str], n: int):
    if text is None:
        return None
    if text == "simulation":
        return simulation_nh_grid()
    if text == "empirical":
        return empirical_nh_grid(n)
    try:
        return np.asarray(parse_int_list(text), dtype=int)
    except ValueError as exc:
        raise ConfigError(f"bad --nh-grid '{text}'") from exc


def _read_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _p_arg(text: str):
    if text == "auto":
        return "auto"
    if text in ("1", "6", "12"):
        return int(text)
    raise argparse.ArgumentTypeError("p must be 1, 6, 12 or auto")


def _series(args):
    return load_series(args.input, args.column, args.transform, args.base_column, args.cpi_column)


def _add_input(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--input", required=required, help="CSV with a 'date' column")
    p.add_argument("--column", help="value column (default: the only one)")
    p.add_argument("--transform", default="none" if required else None,
                   choices=("none", "inflation", "real_exchange_rate"))
    p.add_argument("--cpi-column", help="domestic CPI column for real_exchange_rate")
    p.add_argument("--base-column", help="base-country CPI column for real_exchange_rate")


def _add_bandwidth(p: argparse.ArgumentParser, defaults: bool = True) -> None:
    p.add_argument("--nh-grid", help="'empirical', 'simulation', or a list like 140:500:15,650:1500:50")
    p.add_argument("--c1", type=float, default=0.2 if defaults else None)
    p.add_argument("--c2", type=float, default=1.5 if defaults else None)
    p.add_argument("--a", type=float, default=0.1 if defaults else None)
    p.add_argument("--fixed-nh", type=int, help="skip selection and use this nh")


def _emit(text: str, output: Optional[str]) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _select_nh(series, args) -> int:
    if args.fixed_nh is not None:
        return args.fixed_nh
    grid = _nh_grid(args.nh_grid, series.n)
    grid = empirical_nh_grid(series.n) if grid is None else grid
    return select_bandwidth(series, grid, args.c1, args.c2, args.a).h_us


# -- subcommands ----------------------------------------------------------------


def cmd_fit(args) -> int:
    series = _series(args)
    rows = []
    for tau in args.tau:
        window = make_window_p(series.n, tau, args.nh, args.p)
        fit = local_fit(series, window) if args.p == 1 else adf_fit(series, window, args.p)
        rows.append({
            "tau": tau, "t1": window.t1, "t2": window.t2, "m": window.m,
            "rho_hat": fit.rho_hat, "sigma2_hat": fit.sigma2_hat,
            "se": float(np.sqrt(fit.s2_hat / window.m)),
            "beta_hat": [float(b) for b in getattr(fit, "beta_hat", ())],
        })
    _emit(json.dumps(rows, indent=2) + "\n", args.output)
    return EXIT_OK


def cmd_ci(args) -> int:
    series = _series(args)
    table = load_table(args.table or "embedded", args.seed or 0)
    alpha = 0.05 if args.alpha is None else args.alpha
    nh = args.nh if args.nh is not None else _select_nh(series, args)
    n = series.n
    taus = args.tau if args.tau else [t / n for t in range(1, n + 1)]
    labels = series.labels or tuple(str(t) for t in range(1, n + 1))
    dates = [labels[min(n, max(1, int(np.floor(n * t + 1e-9)))) - 1] for t in taus]
    grid = default_rho0_grid()
    pts = [ar_p_inference(series, t, nh, args.p, alpha, table, grid) for t in taus]
    _emit(format_trajectory_csv(trajectory_rows(pts, dates)), args.output)
    return EXIT_OK


def cmd_bandwidth(args) -> int:
    series = _series(args)
    grid = _nh_grid(args.nh_grid, series.n)
    grid = empirical_nh_grid(series.n) if grid is None else grid
    rep = select_bandwidth(series, grid, args.c1, args.c2, args.a)
    out = {
        "n": rep.n, "h_hat": rep.h_hat, "h_us0": rep.h_us0, "h_us1": rep.h_us1, "h_us": rep.h_us,
        "c1": rep.c1, "c2": rep.c2, "a": rep.a, "grid_above_n": rep.clamped,
        "fe": {str(k): v for k, v in rep.fe_map().items()},
    }
    _emit(json.dumps(out, indent=2) + "\n", args.output)
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = _read_config(args.config)
    # explicit flags win over the config file
    for key in ("input", "column", "transform", "cpi_column", "base_column", "fixed_nh", "c1", "c2",
                "a", "seed", "table", "alpha", "p", "lb_residuals", "output_dir"):
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    if args.tau:
        cfg["taus"] = args.tau
    if args.nh_grid is not None:
        cfg["nh_grid"] = None if args.nh_grid == "empirical" else [int(h) for h in _nh_grid(args.nh_grid, 0)]
    if args.robustness:
        cfg["robustness"] = True
    if args.benchmark:
        cfg["benchmark"] = True
    result = analyze(RunConfig.from_dict(cfg))
    print(f"n={result.series.n} nh_us={result.nh_us} p={result.p} rows={len(result.rows)}")
    print(f"wrote {result.trajectory_path} and {result.summary_path}")
    return EXIT_OK


def cmd_study(args) -> int:
    cfg = _read_config(args.config)
    for key in ("reps", "n", "fixed_nh", "c1", "c2", "a"):
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.alpha is not None:
        cfg["alpha"] = args.alpha
    if args.full:
        cfg.setdefault("dgps", [spec.name for spec in full_catalog()])
        cfg.setdefault("reps", FULL_REPS)
    if args.dgps:
        cfg["dgps"] = [d.strip() for d in args.dgps.split(";") if d.strip()]
    if args.tau:
        cfg["taus"] = args.tau
    if args.nh_grid:
        cfg["nh_grid"] = [int(h) for h in _nh_grid(args.nh_grid, int(cfg.get("n", 1500)))]
    try:
        study = StudyConfig.from_dict(cfg)
        specs = [parse_dgp(name, study.n) for name in study.dgps]
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if args.full:
        print(f"warning: {len(specs)} DGPs x {len(study.taus)} taus x {study.reps} reps "
              "takes many CPU-hours", file=sys.stderr)
    table = load_table(args.table or "embedded", study.seed)
    res = run_study(specs, study.taus, study.reps, study.alpha, study.seed, study.nh_grid,
                    study.fixed_nh, table, c1=study.c1, c2=study.c2, a=study.a)
    write_metrics_csv(res.metrics, args.output)
    if args.raw:
        write_raw_csv(res.raw, args.raw)
    print(f"wrote {args.output}")
    return EXIT_OK


def cmd_gen_table(args) -> int:
    psi = parse_float_list(args.psi_grid) if args.psi_grid else list(TABLE_PSI)
    alphas = parse_float_list(args.alphas) if args.alphas else list(TABLE_ALPHAS)
    table = simulate_quantiles(psi, alphas, B=args.B, n_path=args.n, seed=args.seed or 0)
    write_table(table, args.output)
    print(f"wrote {args.output}")
    return EXIT_OK


def cmd_ljung_box(args) -> int:
    series = _series(args)
    if args.residuals == "raw":
        e = series.values
    elif args.residuals == "full":
        e = full_sample_residuals(series, args.p)
    else:
        e = local_residuals(series, _select_nh(series, args), args.p)
    res = ljung_box(e, args.lags)
    print(json.dumps({"statistic": res.statistic, "lags": res.lags, "p_value": res.p_value,
                      "dof": res.dof, "m": int(len(e))}, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=None, help="RNG seed")
    shared.add_argument("--alpha", type=float, default=None, help="1 - confidence level")
    shared.add_argument("--table", default=None, help="'embedded', 'simulate', or a table CSV path")

    parser = argparse.ArgumentParser(
        prog="tvpar",
        description="Inference for time-varying AR coefficients by local least squares.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[shared], help="local least squares fit at given tau values")
    _add_input(p)
    p.add_argument("--tau", type=float, action="append", required=True)
    p.add_argument("--nh", type=int, required=True)
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--output")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("ci", parents=[shared], help="confidence intervals and median-unbiased estimates")
    _add_input(p)
    _add_bandwidth(p)
    p.add_argument("--tau", type=float, action="append", help="repeatable; default every date")
    p.add_argument("--nh", type=int, help="bandwidth (default: data-driven)")
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--output")
    p.set_defaults(func=cmd_ci)

    p = sub.add_parser("bandwidth", parents=[shared], help="forecast-error bandwidth selection")
    _add_input(p)
    _add_bandwidth(p)
    p.add_argument("--output")
    p.set_defaults(func=cmd_bandwidth)

    p = sub.add_parser("analyze", parents=[shared], help="full empirical workflow")
    _add_input(p, required=False)
    _add_bandwidth(p, defaults=False)
    p.add_argument("--config", help="JSON file with run settings")
    p.add_argument("--tau", type=float, action="append")
    p.add_argument("--p", type=_p_arg, help="1, 6, 12 or auto")
    p.add_argument("--robustness", action="store_true", help="add a block with nh = 1.5 nh_us, rounded")
    p.add_argument("--benchmark", action="store_true", help="add a constant-parameter block (nh = 2n)")
    p.add_argument("--lb-residuals", dest="lb_residuals", choices=("local", "full"))
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("study", parents=[shared], help="Monte Carlo coverage study")
    _add_bandwidth(p, defaults=False)
    p.add_argument("--config", help="JSON file with study settings")
    p.add_argument("--dgps", help="';'-separated names such as 'flat 0.90;sin 1.00-0.60-1.00'")
    p.add_argument("--reps", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--tau", type=float, action="append")
    p.add_argument("--full", action="store_true", help="run all 41 DGPs (M=5000 unless --reps is given)")
    p.add_argument("--raw", help="also write per-replication rows here")
    p.add_argument("--output", default="study.csv")
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("gen-table", parents=[shared], help="simulate the critical-value table")
    p.add_argument("--psi-grid", help="comma-separated psi values")
    p.add_argument("--alphas", help="comma-separated levels")
    p.add_argument("--B", type=int, default=300_000)
    p.add_argument("--n", type=int, default=25_000)
    p.add_argument("--output", default="quantiles.csv")
    p.set_defaults(func=cmd_gen_table)

    p = sub.add_parser("ljung-box", parents=[shared], help="residual autocorrelation test")
    _add_input(p)
    _add_bandwidth(p)
    p.add_argument("--lags", type=int, default=6)
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--residuals", default="local", choices=("local", "full", "raw"))
    p.set_defaults(func=cmd_ljung_box)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            # bandwidth reports record grid values above n themselves
            warnings.simplefilter("ignore", GridClampedWarning)
            return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except TvparError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
