"""Confidence intervals and median-unbiased estimates by grid inversion.

For every candidate ``rho0`` on a grid the t-statistic ``T(rho0)`` is compared
with quantiles of the limit law at the drift ``psi(rho0) = -m ln(rho0)``, where
``m`` is the realized window count. The accepted candidates form the
confidence set; crossings of the median quantile give the MUE.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .critical import QuantileTable, critical_value, embedded_table, psi_of
from .exceptions import EmptyAcceptanceSet, TvparError
from .local import LocalFit, Window, as_series, local_fit, make_window, t_stat


@dataclass(frozen=True)
class Rho0Grid:
    points: np.ndarray
    epsilon1: float = 0.0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("grid needs at least two points")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid must be strictly increasing")
        if pts[-1] > 1.0 or pts[0] < -1.0:
            raise ValueError("grid must lie in [-1, 1]")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.size


def default_rho0_grid() -> Rho0Grid:
    """-1 to .945 by .005, then .950 to 1 by .001 (441 points)."""
    coarse = np.round(-1.0 + 0.005 * np.arange(390), 3)
    fine = np.round(0.95 + 0.001 * np.arange(51), 3)
    return Rho0Grid(np.concatenate([coarse, fine]))


def _resolve(table, grid):
    return (embedded_table() if table is None else table,
            default_rho0_grid() if grid is None else grid)


@dataclass(frozen=True)
class Interval:
    low: float
    high: float
    hull: bool = False


@dataclass(frozen=True)
class Mue:
    low: float
    up: float
    point: float
    flags: tuple = ()


def invert_ci(tstats, psis, grid: Rho0Grid, alpha: float, table: QuantileTable) -> Interval:
    """Equal-tailed acceptance set of the grid tests, reported as ``[min, max]``."""
    lo = critical_value(table, psis, alpha / 2)
    hi = critical_value(table, psis, 1 - alpha / 2)
    accept = (lo <= tstats) & (tstats <= hi)
    idx = np.flatnonzero(accept)
    if idx.size == 0:
        raise EmptyAcceptanceSet("no grid value is accepted")
    hull = idx[-1] - idx[0] + 1 != idx.size
    return Interval(float(grid.points[idx[0]]), float(grid.points[idx[-1]]), bool(hull))


def invert_mue(tstats, psis, grid: Rho0Grid, table: QuantileTable) -> Mue:
    """Median-unbiased interval ``[low, up]`` with point resolution ``up``.

    Both bounds are the continuous crossing points rounded down to the grid:
    ``up`` is the last grid point with ``c(.5) <= T``; ``low`` is the grid
    point just before the first one with ``T <= c(.5)``, or that point itself
    on an exact tie. A single crossing therefore gives ``low == up``.
    An empty one-sided set is clamped to the nearest grid endpoint and flagged.
    """
    med = critical_value(table, psis, 0.5)
    pts = grid.points
    flags = []
    upper_set = np.flatnonzero(med <= tstats)
    lower_set = np.flatnonzero(tstats <= med)
    if upper_set.size:
        up = pts[upper_set[-1]]
    else:
        up = pts[0]
        flags.append("empty_upper_set")
    if lower_set.size:
        i = lower_set[0]
        exact = i == 0 or tstats[i] == med[i]
        low = pts[i] if exact else pts[i - 1]
    else:
        low = pts[-1]
        flags.append("empty_lower_set")
    return Mue(float(low), float(up), float(up), tuple(flags))


def fit_tstats(fit: LocalFit, grid: Rho0Grid):
    """``(T(rho0), psi(rho0))`` across the grid."""
    return t_stat(fit, grid.points), psi_of(fit.m, grid.points)


@dataclass(frozen=True)
class InferencePoint:
    tau: float
    nh_used: int
    window: Optional[Window]
    rho_hat: float
    ci_low: float
    ci_high: float
    ci_is_interval_hull: bool
    mue_low: float
    mue_up: float
    mue_point: float
    alpha: float
    flags: tuple = field(default=())

    @property
    def ok(self) -> bool:
        return not any(f.startswith("error:") for f in self.flags)

    @property
    def ci_length(self) -> float:
        return self.ci_high - self.ci_low


def failed_point(tau, nh, alpha, exc: Exception, window=None) -> InferencePoint:
    nan = float("nan")
    return InferencePoint(tau, int(nh), window, nan, nan, nan, False, nan, nan, nan, alpha,
                          (f"error:{type(exc).__name__}",))


def point_from_stats(tau, nh, alpha, window, rho_hat, tstats, psis, grid, table,
                     extra_flags=()) -> InferencePoint:
    flags = list(extra_flags)
    try:
        ci = invert_ci(tstats, psis, grid, alpha, table)
    except EmptyAcceptanceSet:
        ci = Interval(float("nan"), float("nan"))
        flags.append("empty_ci")
    if ci.hull:
        flags.append("ci_hull")
    m = invert_mue(tstats, psis, grid, table)
    flags.extend(m.flags)
    return InferencePoint(float(tau), int(nh), window, float(rho_hat), ci.low, ci.high, ci.hull,
                          m.low, m.up, m.point, float(alpha), tuple(flags))


def confidence_interval(series, tau: float, nh: int, alpha: float = 0.05,
                        table: Optional[QuantileTable] = None,
                        grid: Optional[Rho0Grid] = None) -> Interval:
    """Nominal ``1 - alpha`` equal-tailed CI for the AR coefficient at ``tau``.

    Raises
    ------
    EmptyAcceptanceSet
        If no grid value is accepted.
    """
    table, grid = _resolve(table, grid)
    series = as_series(series)
    fit = local_fit(series, make_window(series.n, tau, nh))
    return invert_ci(*fit_tstats(fit, grid), grid, alpha, table)


def mue(series, tau: float, nh: int, table: Optional[QuantileTable] = None,
        grid: Optional[Rho0Grid] = None) -> Mue:
    table, grid = _resolve(table, grid)
    series = as_series(series)
    fit = local_fit(series, make_window(series.n, tau, nh))
    return invert_mue(*fit_tstats(fit, grid), grid, table)


def infer_point(series, tau: float, nh: int, alpha: float = 0.05,
                table: Optional[QuantileTable] = None,
                grid: Optional[Rho0Grid] = None) -> InferencePoint:
    """CI and MUE at one ``tau``; numerical failures come back as flagged points."""
    table, grid = _resolve(table, grid)
    series = as_series(series)
    window = None
    try:
        window = make_window(series.n, tau, nh)
        fit = local_fit(series, window)
        tstats, psis = fit_tstats(fit, grid)
    except TvparError as exc:
        return failed_point(tau, nh, alpha, exc, window)
    return point_from_stats(tau, nh, alpha, window, fit.rho_hat, tstats, psis, grid, table)


def trajectory(series, taus: Sequence[float], nh: int, alpha: float = 0.05,
               table: Optional[QuantileTable] = None,
               grid: Optional[Rho0Grid] = None) -> list:
    table, grid = _resolve(table, grid)
    series = as_series(series)
    return [infer_point(series, tau, nh, alpha, table, grid) for tau in taus]
