"""Monte Carlo harness: DGP catalog, path simulation and coverage studies."""
from __future__ import annotations

import csv
import math
import re
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .bandwidth import select_bandwidth, simulation_nh_grid
from .critical import QuantileTable, _n_workers, embedded_table
from .exceptions import ExplosiveInitialization, TvparError
from .inference import Rho0Grid, default_rho0_grid, infer_point
from .local import TimeSeries

SIN_FREQUENCY = 2.5 * math.pi

_KINDS = {"flat": 1, "linear": 2, "flat-lin": 2, "kinked": 3, "sin": 3}


@dataclass(frozen=True)
class RhoShape:
    """Deterministic AR coefficient function on ``[0, 1]``.

    ``sin a-b-a`` is ``(a+b)/2 + (a-b)/2 * cos(2.5 pi (u - .2))``: value ``a`` at
    ``u = .2`` and ``u = 1`` and ``b`` at ``u = .6``.
    """

    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown shape {self.kind!r}")
        params = tuple(float(p) for p in self.params)
        if len(params) != _KINDS[self.kind]:
            raise ValueError(f"{self.kind} takes {_KINDS[self.kind]} parameters")
        if self.kind == "sin" and params[0] != params[2]:
            raise ValueError("a sinusoid of frequency 2.5 pi takes equal values at u=.2 and u=1")
        object.__setattr__(self, "params", params)
        vals = self(np.linspace(0.0, 1.0, 2001))
        if np.any(vals < -1.0) or np.any(vals > 1.0):
            raise ValueError(f"{self.name} leaves [-1, 1]")

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        p = self.params
        if self.kind == "flat":
            out = np.full(u.shape, p[0])
        elif self.kind == "linear":
            out = p[0] + (p[1] - p[0]) * u
        elif self.kind == "flat-lin":
            out = np.where(u <= 0.5, p[0], p[0] + (p[1] - p[0]) * (u - 0.5) / 0.5)
        elif self.kind == "kinked":
            out = np.where(u <= 0.5, p[0] + (p[1] - p[0]) * u / 0.5,
                           p[1] + (p[2] - p[1]) * (u - 0.5) / 0.5)
        else:
            mid, amp = (p[0] + p[1]) / 2, (p[0] - p[1]) / 2
            out = mid + amp * np.cos(SIN_FREQUENCY * (u - 0.2))
        return float(out) if out.ndim == 0 else out

    @property
    def name(self) -> str:
        return f"{self.kind} " + "-".join(f"{p:.2f}" for p in self.params)


@dataclass(frozen=True)
class DgpSpec:
    """``Y_t = mu*_t + rho_t Y_{t-1} + sigma_t U_t`` with linear ``mu*`` and ``sigma``."""

    rho: RhoShape
    mu_star: tuple = (0.0, 0.0)
    sigma: tuple = (1.0, 1.0)
    n: int = 1500

    @property
    def time_varying(self) -> bool:
        return self.mu_star[0] != self.mu_star[1] or self.sigma[0] != self.sigma[1]

    @property
    def name(self) -> str:
        return self.rho.name + (" tv" if self.time_varying else "")

    def rho_fn(self, u):
        return self.rho(u)

    def mu_star_fn(self, u):
        u = np.asarray(u, dtype=float)
        return self.mu_star[0] + (self.mu_star[1] - self.mu_star[0]) * u

    def sigma_fn(self, u):
        u = np.asarray(u, dtype=float)
        return self.sigma[0] + (self.sigma[1] - self.sigma[0]) * u


TV_MU_STAR = (-0.1, 0.1)
TV_SIGMA = (0.95, 1.05)

_NAME_RE = re.compile(r"^\s*(flat-lin|flat|linear|kinked|sin)\s+([-0-9.]+(?:-[0-9.]+)*)\s*(tv)?\s*$")


def parse_dgp(name: str, n: int = 1500) -> DgpSpec:
    """Parse names such as ``"flat-lin 0.90-0.99"`` or ``"sin 1.00-0.60-1.00 tv"``."""
    m = _NAME_RE.match(name)
    if not m:
        raise ValueError(f"cannot parse DGP name {name!r}")
    kind, params, tv = m.groups()
    shape = RhoShape(kind, tuple(float(x) for x in params.split("-")))
    if tv:
        return DgpSpec(shape, TV_MU_STAR, TV_SIGMA, n)
    return DgpSpec(shape, n=n)


CATALOG_SHAPES = (
    "sin 1.00-0.90-1.00", "sin 0.90-1.00-0.90", "sin 1.00-0.80-1.00",
    "sin 0.80-1.00-0.80", "sin 1.00-0.60-1.00", "sin 0.60-1.00-0.60",
    "linear 0.90-1.00", "linear 1.00-0.90", "linear 0.60-0.90", "linear 0.90-0.60",
    "flat-lin 0.90-0.99", "flat-lin 0.80-0.99", "flat-lin 0.99-0.90", "flat-lin 0.99-0.80",
    "flat 0.75", "flat 0.90", "flat 0.99",
    "kinked 1.00-0.80-1.00", "kinked 0.80-1.00-0.80",
    "kinked 1.00-0.60-1.00", "kinked 0.60-1.00-0.60",
)

DESK_DGPS = (
    "flat 0.90", "flat 0.99", "sin 1.00-0.90-1.00",
    "linear 0.90-1.00", "flat-lin 0.90-0.99", "kinked 1.00-0.80-1.00",
)


def full_catalog(n: int = 1500) -> list:
    """The 41 DGPs: 21 shapes with constant and time-varying ``(mu*, sigma)``.

    ``sin 0.60-1.00-0.60`` appears only in its time-varying version.
    """
    out = []
    for shape in CATALOG_SHAPES:
        if shape != "sin 0.60-1.00-0.60":
            out.append(parse_dgp(shape, n))
        out.append(parse_dgp(shape + " tv", n))
    return out


# -- paths -----------------------------------------------------------------------


@dataclass(frozen=True)
class SimulatedPath:
    series: TimeSeries
    y0: float
    u: np.ndarray
    rho: np.ndarray
    mu_star: np.ndarray
    sigma: np.ndarray
    flags: tuple = ()


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.default_rng(seed)


def simulate_path(spec: DgpSpec, seed) -> SimulatedPath:
    """Draw one path ``Y_1..Y_n``.

    ``Y_0 ~ N(0, s^2)`` with ``s = 1 / (1 - rbar^2)`` and ``rbar`` the average of
    ``rho_t``; when ``rbar^2 >= 1`` the start is ``Y_0 = 0`` and the path is
    flagged.
    """
    rng = _rng(seed)
    n = spec.n
    u_frac = np.arange(1, n + 1) / n
    rho = np.asarray(spec.rho_fn(u_frac), dtype=float)
    mu = np.asarray(spec.mu_star_fn(u_frac), dtype=float)
    sig = np.asarray(spec.sigma_fn(u_frac), dtype=float)
    z0 = rng.standard_normal()
    u = rng.standard_normal(n)
    rbar = rho.mean()
    flags = ()
    if rbar * rbar >= 1.0:
        warnings.warn("average rho is at least one; starting from Y_0 = 0",
                      ExplosiveInitialization, stacklevel=2)
        y0 = 0.0
        flags = ("explosive_initialization",)
    else:
        y0 = z0 / (1.0 - rbar * rbar)
    shocks = (mu + sig * u).tolist()
    coef = rho.tolist()
    y = [0.0] * n
    prev = y0
    for t in range(n):
        prev = shocks[t] + coef[t] * prev
        y[t] = prev
    return SimulatedPath(TimeSeries(np.array(y)), float(y0), u, rho, mu, sig, flags)


# -- studies ---------------------------------------------------------------------


@dataclass(frozen=True)
class McMetrics:
    dgp: str
    tau: float
    coverage: float
    avg_length: float
    abs_median_bias: float
    mad_lower: float
    mad_upper: float
    median_nh_us: float
    reps: int
    failures: int = 0


METRIC_FIELDS = ("dgp", "tau", "coverage", "avg_length", "abs_median_bias",
                 "mad_lower", "mad_upper", "median_nh_us", "reps")


@dataclass(frozen=True)
class StudyConfig:
    dgps: tuple = DESK_DGPS
    reps: int = 500
    n: int = 1500
    taus: tuple = (0.2, 0.4, 0.6, 0.8, 1.0)
    alpha: float = 0.05
    seed: int = 20240101
    nh_grid: Optional[tuple] = None
    fixed_nh: Optional[int] = None
    c1: float = 0.2
    c2: float = 1.5
    a: float = 0.1

    @classmethod
    def from_dict(cls, d: dict) -> "StudyConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        unknown = set(d) - set(known)
        if unknown:
            raise ValueError(f"unknown study config keys: {sorted(unknown)}")
        for key in ("dgps", "taus", "nh_grid"):
            if known.get(key) is not None:
                known[key] = tuple(known[key])
        return cls(**known)


def replicate(spec: DgpSpec, seed_seq, taus, alpha, nh_grid, fixed_nh, table, grid,
              c1=0.2, c2=1.5, a=0.1) -> list:
    """One replication: simulate, choose ``nh``, infer at every ``tau``."""
    path = simulate_path(spec, seed_seq)
    if fixed_nh is not None:
        nh = int(fixed_nh)
    else:
        nh = select_bandwidth(path.series, nh_grid, c1, c2, a).h_us
    rows = []
    for tau in taus:
        pt = infer_point(path.series, tau, nh, alpha, table, grid)
        rows.append({
            "tau": float(tau),
            "truth": float(spec.rho_fn(tau)),
            "nh": nh,
            "ci_low": pt.ci_low,
            "ci_high": pt.ci_high,
            "mue": pt.mue_point,
            "ok": pt.ok,
            "flags": "|".join(pt.flags),
        })
    return rows


def _replicate_batch(args):
    spec, dgp_index, reps, seed, taus, alpha, nh_grid, fixed_nh, table, grid, tuning = args
    out = []
    for r in reps:
        ss = np.random.SeedSequence(seed, spawn_key=(dgp_index, r))
        try:
            rows = replicate(spec, ss, taus, alpha, nh_grid, fixed_nh, table, grid, *tuning)
        except TvparError as exc:
            rows = [{"tau": float(t), "truth": float(spec.rho_fn(t)), "nh": -1,
                     "ci_low": math.nan, "ci_high": math.nan, "mue": math.nan,
                     "ok": False, "flags": f"error:{type(exc).__name__}"} for t in taus]
        for row in rows:
            row.update(dgp=spec.name, rep=r)
        out.extend(rows)
    return out


def summarize(rows: Sequence[dict], dgp: str, tau: float) -> McMetrics:
    sel = [r for r in rows if r["dgp"] == dgp and r["tau"] == tau]
    ok = [r for r in sel if r["ok"]]
    failures = len(sel) - len(ok)
    if not ok:
        nan = math.nan
        return McMetrics(dgp, tau, nan, nan, nan, nan, nan, nan, 0, failures)
    truth = np.array([r["truth"] for r in ok])
    lo = np.array([r["ci_low"] for r in ok])
    hi = np.array([r["ci_high"] for r in ok])
    nonempty = np.isfinite(lo)
    tol = 1e-12
    covered = nonempty & (lo <= truth + tol) & (truth - tol <= hi)
    dev = np.array([r["mue"] for r in ok]) - truth
    return McMetrics(
        dgp=dgp,
        tau=tau,
        coverage=float(covered.mean()),
        avg_length=float(np.mean((hi - lo)[nonempty])) if nonempty.any() else math.nan,
        abs_median_bias=float(abs(np.median(dev))),
        mad_lower=float(2 * np.mean(np.abs(dev) * (dev < 0))),
        mad_upper=float(2 * np.mean(np.abs(dev) * (dev > 0))),
        median_nh_us=float(np.median([r["nh"] for r in ok])),
        reps=len(ok),
        failures=failures,
    )


@dataclass
class StudyResult:
    metrics: list
    raw: list = field(default_factory=list)

    def get(self, dgp: str, tau: float) -> McMetrics:
        for m in self.metrics:
            if m.dgp == dgp and math.isclose(m.tau, tau):
                return m
        raise KeyError((dgp, tau))


def run_study(specs: Sequence[DgpSpec], taus: Sequence[float] = (0.2, 0.4, 0.6, 0.8, 1.0),
              reps: int = 500, alpha: float = 0.05, seed: int = 0,
              nh_grid: Optional[Sequence[int]] = None, fixed_nh: Optional[int] = None,
              table: Optional[QuantileTable] = None, grid: Optional[Rho0Grid] = None,
              n_jobs: Optional[int] = None, c1: float = 0.2, c2: float = 1.5,
              a: float = 0.1) -> StudyResult:
    """Coverage, length and median-bias metrics for each ``(dgp, tau)``.

    Replication ``r`` of the ``i``-th DGP draws from the stream keyed by
    ``(seed, i, r)``; rows are folded in index order, so results do not depend
    on ``n_jobs``. Failed replications are counted, not raised.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    table = embedded_table() if table is None else table
    grid = default_rho0_grid() if grid is None else grid
    nh_grid = simulation_nh_grid() if nh_grid is None else np.asarray(nh_grid, dtype=int)
    taus = tuple(float(t) for t in taus)
    workers = _n_workers(n_jobs)
    batch = max(1, math.ceil(reps / (4 * workers)))
    jobs = []
    for i, spec in enumerate(specs):
        for start in range(0, reps, batch):
            jobs.append((spec, i, range(start, min(start + batch, reps)), seed, taus, alpha,
                         nh_grid, fixed_nh, table, grid, (c1, c2, a)))
    if workers == 1:
        parts = [_replicate_batch(j) for j in jobs]
    else:
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_replicate_batch, jobs))
    raw = [row for part in parts for row in part]
    metrics = [summarize(raw, spec.name, tau) for spec in specs for tau in taus]
    return StudyResult(metrics, raw)


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_metrics_csv(metrics: Sequence[McMetrics], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRIC_FIELDS)
        for m in metrics:
            d = asdict(m)
            w.writerow([_fmt(d[k]) for k in METRIC_FIELDS])
    return path


RAW_FIELDS = ("dgp", "rep", "tau", "truth", "nh", "ci_low", "ci_high", "mue", "ok", "flags")


def write_raw_csv(raw: Sequence[dict], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RAW_FIELDS)
        for row in raw:
            w.writerow([_fmt(row[k]) for k in RAW_FIELDS])
    return path
