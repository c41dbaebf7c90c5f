"""Local least squares estimation of a time-varying AR(1) coefficient.

Observations are 1-indexed throughout: ``Y_t`` for ``t = 1, ..., n`` is stored
at position ``t - 1`` of :attr:`TimeSeries.values`. A window ``[t1, t2]``
regresses ``Y_t`` on a constant and ``Y_{t-1}`` for ``t = t1, ..., t2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .exceptions import (
    DataError,
    DegenerateRegressor,
    TauOutOfRange,
    WindowTooSmall,
    ZeroStandardError,
)

MIN_WINDOW = 8

# Relative residual energy below which a fit is treated as exact.
_EXACT_FIT_RTOL = 1e-26


@dataclass(frozen=True)
class TimeSeries:
    """Finite real-valued observations with optional date labels."""

    values: np.ndarray
    labels: Optional[tuple] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise DataError("series must be one-dimensional")
        if values.shape[0] < 3:
            raise DataError(f"series needs at least 3 observations, got {values.shape[0]}")
        if not np.all(np.isfinite(values)):
            raise DataError("series contains NaN or infinite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.labels is not None:
            labels = tuple(str(x) for x in self.labels)
            if len(labels) != values.shape[0]:
                raise DataError("labels and values differ in length")
            object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def __len__(self) -> int:
        return self.n


def as_series(data) -> TimeSeries:
    if isinstance(data, TimeSeries):
        return data
    return TimeSeries(np.asarray(data, dtype=float))


@dataclass(frozen=True)
class Window:
    """Estimation window ``t1..t2`` (inclusive, 1-indexed)."""

    t1: int
    t2: int
    nh_nominal: int

    def __post_init__(self):
        if self.t1 < 2:
            raise WindowTooSmall(f"t1={self.t1}: the lag Y_(t1-1) must exist")
        if self.t2 - self.t1 + 1 < 2:
            raise WindowTooSmall(f"window [{self.t1}, {self.t2}] has fewer than 2 points")

    @property
    def m(self) -> int:
        """Realized number of observations in the window."""
        return self.t2 - self.t1 + 1


def _center_index(n: int, tau: float) -> int:
    # tolerance keeps floor(n * (t / n)) == t under rounding
    return int(math.floor(n * tau + 1e-9))


def make_window(
    n: int, tau: float, nh: int, *, first: int = 2, min_count: int = MIN_WINDOW
) -> Window:
    """Window of roughly ``nh`` observations centered at ``floor(n * tau)``.

    Near the sample boundaries the abundant side keeps ``nh // 2`` points and
    the deficient side is cut at the boundary, so fewer than ``nh`` points may
    be used. ``nh >= n`` selects the full sample ``[first, n]``.

    Parameters
    ----------
    n : int
        Sample size.
    tau : float
        Fraction of the sample in ``(0, 1]``.
    nh : int
        Nominal number of observations.
    first : int, default 2
        Smallest admissible ``t1``; ``p + 1`` for an AR(p) regression.
    min_count : int, default 8
        Smallest admissible realized window count.
    """
    if n < 3:
        raise DataError(f"n={n} is too small")
    if not (0.0 < tau <= 1.0):
        raise TauOutOfRange(f"tau={tau} not in (0, 1]")
    nh = int(nh)
    if nh < min_count:
        raise WindowTooSmall(f"nh={nh} below the minimum of {min_count}")
    if nh >= n:
        t1, t2 = first, n
    else:
        center = _center_index(n, tau)
        half = nh // 2
        t1, t2 = center - half, center + half
        if t1 < first:
            t1 = first
            t2 = min(center + half, n)
        elif t2 > n:
            t2 = n
            t1 = max(center - half, first)
    if t2 - t1 + 1 < min_count:
        raise WindowTooSmall(
            f"window [{t1}, {t2}] has {t2 - t1 + 1} points, need {min_count}"
        )
    return Window(t1, t2, nh)


@dataclass(frozen=True)
class LocalFit:
    rho_hat: float
    sigma2_hat: float
    s2_hat: float
    ybar: float
    ybar_lag: float
    window: Window

    @property
    def m(self) -> int:
        return self.window.m


def window_arrays(series: TimeSeries, window: Window):
    """Return ``(Y_t, Y_{t-1})`` for ``t`` in the window."""
    if window.t2 > series.n:
        raise WindowTooSmall(f"window ends at {window.t2} but n={series.n}")
    y = series.values
    return y[window.t1 - 1 : window.t2], y[window.t1 - 2 : window.t2 - 1]


def local_fit(series, window: Window) -> LocalFit:
    """Least squares fit of ``Y_t`` on ``(1, Y_{t-1})`` over ``window``.

    The variance estimate divides by the realized window count ``m``.
    """
    series = as_series(series)
    yt, ylag = window_arrays(series, window)
    m = window.m
    if np.ptp(ylag) == 0.0:
        raise DegenerateRegressor(
            f"Y_(t-1) is constant on [{window.t1}, {window.t2}]"
        )
    ybar = np.mean(yt)
    ybar_lag = np.mean(ylag)
    dx = ylag - ybar_lag
    dy = yt - ybar
    sxx = np.sum(dx * dx)
    if not sxx > 0.0:
        raise DegenerateRegressor("zero variation in the lagged regressor")
    rho = np.sum(dx * dy) / sxx
    resid = dy - rho * dx
    ssr = np.sum(resid * resid)
    if ssr <= _EXACT_FIT_RTOL * np.sum(dy * dy):
        ssr = 0.0
    sigma2 = ssr / m
    s2 = sigma2 / (sxx / m)
    return LocalFit(float(rho), float(sigma2), float(s2), float(ybar), float(ybar_lag), window)


def t_stat(fit: LocalFit, rho0):
    """t-statistic ``m^(1/2) (rho_hat - rho0) / s_hat``; vectorized in ``rho0``."""
    if not fit.s2_hat > 0.0:
        raise ZeroStandardError("estimated standard error is zero")
    out = math.sqrt(fit.m) * (fit.rho_hat - np.asarray(rho0, dtype=float)) / math.sqrt(fit.s2_hat)
    return float(out) if np.ndim(out) == 0 else out


def fit_at(series, tau: float, nh: int) -> LocalFit:
    """Convenience wrapper: build the window for ``tau`` and fit it."""
    series = as_series(series)
    return local_fit(series, make_window(series.n, tau, nh))


def taus_for_dates(n: int, dates: Optional[Sequence[int]] = None) -> np.ndarray:
    """Fractions ``t / n`` for the given 1-indexed dates (all dates by default)."""
    t = np.arange(1, n + 1) if dates is None else np.asarray(dates)
    return t / n
