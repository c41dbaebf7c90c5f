"""End-to-end empirical workflow: ingest, bandwidth, trajectories, reports."""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .arp import LAG_CHOICES, ar_p_inference, full_sample_residuals, local_residuals, ljung_box
from .bandwidth import BandwidthReport, empirical_nh_grid, robustness_bandwidth, select_bandwidth
from .critical import TABLE_PSI, QuantileTable, embedded_table, read_table, simulate_quantiles
from .exceptions import ConfigError, GridClampedWarning, TvparError
from .inference import InferencePoint, default_rho0_grid
from .local import TimeSeries, as_series
from .data import load_series

TRAJECTORY_FIELDS = ("date", "tau", "rho_hat", "mue", "ci_low", "ci_high", "nh_used", "flags")
TRANSFORMS = ("none", "inflation", "real_exchange_rate")


@dataclass
class RunConfig:
    """Settings for :func:`analyze`; ``taus=None`` sweeps every date."""

    input: str
    column: Optional[str] = None
    transform: str = "none"
    cpi_column: Optional[str] = None
    base_column: Optional[str] = None
    taus: Optional[Sequence[float]] = None
    p: Union[int, str] = 1
    alpha: float = 0.10
    nh_grid: Optional[Sequence[int]] = None
    fixed_nh: Optional[int] = None
    c1: float = 0.2
    c2: float = 1.5
    a: float = 0.1
    seed: int = 0
    table: str = "embedded"
    table_B: int = 300_000
    table_n: int = 25_000
    robustness: bool = False
    benchmark: bool = False
    lb_lags: int = 6
    lb_residuals: str = "local"
    output_dir: str = "."

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha={self.alpha} not in (0, 1)")
        if self.transform not in TRANSFORMS:
            raise ConfigError(f"transform must be one of {TRANSFORMS}")
        if self.p != "auto" and (not isinstance(self.p, int) or self.p < 1):
            raise ConfigError(f"p must be a positive integer or 'auto', got {self.p!r}")
        if self.lb_residuals not in ("local", "full"):
            raise ConfigError("lb_residuals must be 'local' or 'full'")
        if self.taus is not None and any(not 0.0 < t <= 1.0 for t in self.taus):
            raise ConfigError("taus must lie in (0, 1]")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "input" not in d:
            raise ConfigError("config needs an 'input' path")
        return cls(**d)


def load_table(source: str, seed: int = 0, B: int = 300_000, n_path: int = 25_000) -> QuantileTable:
    """``"embedded"``, ``"simulate"`` or a path to a saved table."""
    if source == "embedded":
        return embedded_table()
    if source == "simulate":
        return simulate_quantiles(TABLE_PSI, B=B, n_path=n_path, seed=seed)
    path = Path(source)
    if not path.exists():
        raise ConfigError(f"table file {path} not found")
    return read_table(path)


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def trajectory_rows(points: Sequence[InferencePoint], dates: Sequence[str]) -> list:
    return [
        {
            "date": d, "tau": pt.tau, "rho_hat": pt.rho_hat, "mue": pt.mue_point,
            "ci_low": pt.ci_low, "ci_high": pt.ci_high, "nh_used": pt.nh_used,
            "flags": ";".join(pt.flags),
        }
        for pt, d in zip(points, dates)
    ]


def format_trajectory_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJECTORY_FIELDS)
    for r in rows:
        w.writerow([_fmt(r[k]) for k in TRAJECTORY_FIELDS])
    return buf.getvalue()


def write_trajectory_csv(rows: Sequence[dict], path) -> Path:
    path = Path(path)
    path.write_text(format_trajectory_csv(rows))
    return path


def read_trajectory_csv(path) -> list:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for k in ("tau", "rho_hat", "mue", "ci_low", "ci_high"):
            r[k] = float(r[k])
        r["nh_used"] = int(r["nh_used"])
    return rows


def ljung_box_by_order(series: TimeSeries, nh: int, orders: Sequence[int] = LAG_CHOICES,
                       lags: int = 6, residuals: str = "local") -> dict:
    """Ljung-Box result (or error text) for each lag order."""
    out = {}
    for p in orders:
        try:
            e = local_residuals(series, nh, p) if residuals == "local" else full_sample_residuals(series, p)
            out[p] = asdict(ljung_box(e, lags))
        except TvparError as exc:
            out[p] = {"error": f"{type(exc).__name__}: {exc}"}
    return out


def choose_p(tests: dict) -> tuple:
    """Smallest order whose Ljung-Box p-value is at least .05."""
    for p in sorted(tests):
        pv = tests[p].get("p_value")
        if pv is not None and pv >= 0.05:
            return p, ()
    return max(tests), ("no_lag_order_passes",)


def _bandwidth(series: TimeSeries, cfg: RunConfig):
    if cfg.fixed_nh is not None:
        return int(cfg.fixed_nh), None
    grid = empirical_nh_grid(series.n) if cfg.nh_grid is None else np.asarray(cfg.nh_grid, dtype=int)
    # the empirical grid reaches 2n by design; the report records it
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GridClampedWarning)
        report = select_bandwidth(series, grid, cfg.c1, cfg.c2, cfg.a)
    return report.h_us, report


def _report_json(report: Optional[BandwidthReport]) -> Optional[dict]:
    if report is None:
        return None
    return {
        "grid": [int(h) for h in report.grid],
        "fe": [float(v) for v in report.fe],
        "h_hat": report.h_hat, "h_us0": report.h_us0, "h_us1": report.h_us1,
        "h_us": report.h_us, "c1": report.c1, "c2": report.c2, "a": report.a,
        "grid_above_n": report.clamped,
    }


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


@dataclass
class AnalysisResult:
    series: TimeSeries
    nh_us: int
    p: int
    rows: list
    summary: dict
    trajectory_path: Path
    summary_path: Path
    bandwidth: Optional[BandwidthReport] = field(default=None, repr=False)


def analyze(config: Union[RunConfig, dict], series: Optional[TimeSeries] = None) -> AnalysisResult:
    """Bandwidth selection and per-date CI/MUE trajectory for one series.

    Writes ``trajectory.csv`` and ``summary.json`` into ``config.output_dir``.
    Trajectory blocks follow one another in the CSV: the selected bandwidth,
    then ``1.5 nh_us`` (rounded) with ``robustness``, then ``nh = 2n`` with
    ``benchmark``; ``nh_used`` tells them apart. A pre-loaded ``series``
    bypasses ingest.
    """
    cfg = config if isinstance(config, RunConfig) else RunConfig.from_dict(config)
    if series is None:
        series = load_series(cfg.input, cfg.column, cfg.transform, cfg.base_column, cfg.cpi_column)
    series = as_series(series)
    n = series.n
    dates = list(series.labels) if series.labels is not None else [str(t) for t in range(1, n + 1)]
    table = load_table(cfg.table, cfg.seed, cfg.table_B, cfg.table_n)
    grid = default_rho0_grid()

    nh_us, report = _bandwidth(series, cfg)
    lb = ljung_box_by_order(series, nh_us, LAG_CHOICES, cfg.lb_lags, cfg.lb_residuals)
    p_flags: tuple = ()
    if cfg.p == "auto":
        p, p_flags = choose_p(lb)
    else:
        p = int(cfg.p)

    if cfg.taus is None:
        idx = list(range(n))
    else:
        idx = [min(n, max(1, math.floor(n * t + 1e-9))) - 1 for t in cfg.taus]
    taus = [(i + 1) / n for i in idx] if cfg.taus is None else [float(t) for t in cfg.taus]
    row_dates = [dates[i] for i in idx]

    blocks = [nh_us]
    if cfg.robustness:
        blocks.append(robustness_bandwidth(nh_us))
    if cfg.benchmark:
        blocks.append(2 * n)
    rows = []
    for nh in blocks:
        pts = [ar_p_inference(series, tau, nh, p, cfg.alpha, table, grid) for tau in taus]
        rows.extend(trajectory_rows(pts, row_dates))

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    traj_path = write_trajectory_csv(rows, out / "trajectory.csv")
    n_flagged = sum(1 for r in rows if r["flags"])
    summary = {
        "config": asdict(cfg),
        "n": n,
        "seed": cfg.seed,
        "table_provenance": table.provenance,
        "p": p,
        "p_flags": list(p_flags),
        "nh_us": nh_us,
        "blocks": blocks,
        "bandwidth": _report_json(report),
        "ljung_box": {"lags": cfg.lb_lags, "residuals": cfg.lb_residuals, "by_p": lb},
        "rows": len(rows),
        "flagged_rows": n_flagged,
    }
    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps(_json_safe(summary), indent=2) + "\n")
    return AnalysisResult(series, nh_us, p, rows, summary, traj_path, summary_path, report)
