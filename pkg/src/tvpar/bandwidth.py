"""Data-dependent bandwidth from rolling one-step forecast errors.

``FE(nh)`` averages squared errors of one-step forecasts whose coefficients
come from an OLS fit of ``Y_s`` on ``(1, Y_{s-1})`` over the ``nh`` preceding
observations. The first ``nh + 1`` dates, which lack a full history, use a
leave-one-out fit on the initial block instead.

Indexing: ``Y_1`` has no lag, so forecasts run over ``t = 2..n`` and the
initial block is ``s = 2..min(nh+2, n)`` with ``s = t`` removed. For
``nh >= n - 1`` every date uses the leave-one-out fit on the whole sample.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .exceptions import DataError, GridClampedWarning, WindowTooSmall
from .local import MIN_WINDOW, as_series

_DEGENERATE_RTOL = 1e-13


@dataclass(frozen=True)
class OneStepFit:
    """Rolling coefficient estimates for forecasting ``Y_t``, ``t = 2..n``."""

    t: np.ndarray
    mu_hat: np.ndarray
    rho_hat: np.ndarray
    valid: np.ndarray

    def predictions(self, values: np.ndarray) -> np.ndarray:
        return self.mu_hat + self.rho_hat * values[self.t - 2]


def _window_sums(csum: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return csum[b + 1] - csum[a]


def one_step_fits(series, nh: int) -> OneStepFit:
    """Coefficients used to forecast each ``Y_t`` with bandwidth ``nh``.

    Window sums come from cumulative sums of the globally centered data, which
    keeps each rolling step O(1).
    """
    series = as_series(series)
    y = series.values
    n = series.n
    L = int(nh)
    if L < MIN_WINDOW:
        raise WindowTooSmall(f"nh={L} below the minimum of {MIN_WINDOW}")
    if n < MIN_WINDOW + 2:
        raise WindowTooSmall(f"n={n} too small for rolling forecasts")
    c = y.mean()
    x = y[:-1] - c  # Y_{s-1} for pair index k = s - 2
    z = y[1:] - c  # Y_s
    zero = np.zeros(1)
    cx = np.concatenate([zero, np.cumsum(x)])
    cz = np.concatenate([zero, np.cumsum(z)])
    cxx = np.concatenate([zero, np.cumsum(x * x)])
    cxz = np.concatenate([zero, np.cumsum(x * z)])

    t = np.arange(2, n + 1)
    kt = t - 2
    roll = t >= L + 2
    block_end = min(L, n - 2)  # last pair index of the initial block
    a = np.where(roll, t - L - 2, 0)
    b = np.where(roll, t - 3, block_end)
    count = np.where(roll, L, block_end)
    sx = _window_sums(cx, a, b)
    sz = _window_sums(cz, a, b)
    sxx = _window_sums(cxx, a, b)
    sxz = _window_sums(cxz, a, b)
    init = ~roll
    # leave out the forecast target from the initial block
    sx[init] -= x[kt[init]]
    sz[init] -= z[kt[init]]
    sxx[init] -= x[kt[init]] ** 2
    sxz[init] -= x[kt[init]] * z[kt[init]]

    xbar = sx / count
    zbar = sz / count
    Sxx = sxx - count * xbar * xbar
    Sxz = sxz - count * xbar * zbar
    valid = Sxx > _DEGENERATE_RTOL * np.maximum(sxx, np.finfo(float).tiny)
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(valid, Sxz / Sxx, np.nan)
    mu = (zbar + c) - rho * (xbar + c)
    return OneStepFit(t, mu, rho, valid)


def rolling_forecast_errors(series, nh: int, return_fit: bool = False):
    """Average squared one-step forecast error ``FE(nh)``.

    The average runs over ``t = 2..n`` (``Y_1`` has no lag); dates whose fitting
    block is degenerate are skipped and the average renormalized.
    """
    series = as_series(series)
    fit = one_step_fits(series, nh)
    err = series.values[fit.t - 1] - fit.predictions(series.values)
    fe = float(np.mean(err[fit.valid] ** 2)) if fit.valid.any() else float("nan")
    return (fe, fit) if return_fit else fe


@dataclass(frozen=True)
class LossDecomposition:
    fe: float
    loss: float
    cross: float
    noise: float

    @property
    def residual(self) -> float:
        return self.fe - (self.loss - 2 * self.cross + self.noise)


def loss_decomposition(series, nh: int, rho, mu_star, sigma, u) -> LossDecomposition:
    """Split ``FE`` into empirical loss, cross term and noise average.

    ``rho``, ``mu_star``, ``sigma`` and ``u`` are the true coefficient, intercept,
    scale and innovation at ``t = 1..n`` of a series generated as
    ``Y_t = mu_star_t + rho_t Y_{t-1} + sigma_t u_t``.
    """
    series = as_series(series)
    y = series.values
    fit = one_step_fits(series, nh)
    idx = fit.t - 1
    sel = fit.valid
    dev = (fit.mu_hat - np.asarray(mu_star)[idx] + y[idx - 1] * (fit.rho_hat - np.asarray(rho)[idx]))[sel]
    shock = (np.asarray(sigma) * np.asarray(u))[idx][sel]
    err = (y[idx] - fit.predictions(y))[sel]
    return LossDecomposition(
        float(np.mean(err**2)),
        float(np.mean(dev**2)),
        float(np.mean(shock * dev)),
        float(np.mean(shock**2)),
    )


def empirical_loss(series, nh: int, rho, mu_star) -> float:
    """Infeasible loss ``mean((mu_hat - mu*_t + Y_{t-1}(rho_hat - rho_t))^2)``."""
    series = as_series(series)
    y = series.values
    fit = one_step_fits(series, nh)
    idx = fit.t - 1
    dev = fit.mu_hat - np.asarray(mu_star)[idx] + y[idx - 1] * (fit.rho_hat - np.asarray(rho)[idx])
    return float(np.mean(dev[fit.valid] ** 2))


# -- grids and selection --------------------------------------------------------


def simulation_nh_grid() -> np.ndarray:
    """140, 155, ..., 500 then 650, 700, ..., 1500."""
    return np.concatenate([np.arange(140, 501, 15), np.arange(650, 1501, 50)])


def empirical_nh_grid(n: int) -> np.ndarray:
    """.2n to .5n in steps of .02n, then to 2n in steps of .05n (rounded)."""
    fracs = np.concatenate([0.2 + 0.02 * np.arange(16), 0.55 + 0.05 * np.arange(30)])
    return np.unique(np.rint(fracs * n).astype(int))


@dataclass(frozen=True)
class BandwidthReport:
    grid: np.ndarray
    fe: np.ndarray
    h_hat: int
    h_us0: int
    h_us1: float
    h_us: int
    c1: float
    c2: float
    a: float
    n: int
    clamped: bool = False

    def fe_map(self) -> dict:
        return {int(h): float(v) for h, v in zip(self.grid, self.fe)}


def choose_bandwidth(grid, fe, n: int, c1: float = 0.2, c2: float = 1.5,
                     a: float = 0.1, clamped: bool = False) -> BandwidthReport:
    """Apply the selection rules to criterion values already computed.

    ``h_hat`` is the largest minimizer over the grid; ``h_us0`` the smallest
    grid value whose ``FE`` is at or below the ``c1`` quantile of the ``FE``
    values; ``h_us1 = c2 * n**(-a) * h_hat``; and ``h_us`` the floor of the
    smaller of the two (never below 8). All values are observation counts.
    Non-finite criterion values are ignored.
    """
    grid = np.asarray(grid, dtype=int)
    fe = np.asarray(fe, dtype=float)
    finite = np.isfinite(fe)
    if not finite.any():
        raise DataError("forecast-error criterion undefined for every bandwidth")
    best = np.min(fe[finite])
    h_hat = int(grid[np.flatnonzero(finite & (fe == best))[-1]])
    q = np.quantile(fe[finite], c1)
    h_us0 = int(grid[np.flatnonzero(finite & (fe <= q))[0]])
    h_us1 = c2 * n ** (-a) * h_hat
    h_us = max(MIN_WINDOW, int(math.floor(min(h_us0, h_us1))))
    return BandwidthReport(grid, fe, h_hat, h_us0, float(h_us1), h_us, c1, c2, a, n, clamped)


def select_bandwidth(series, grid: Optional[Sequence[int]] = None, c1: float = 0.2,
                     c2: float = 1.5, a: float = 0.1) -> BandwidthReport:
    """Choose ``nh`` by minimizing ``FE`` and undersmooth the minimizer.

    See :func:`choose_bandwidth` for the rules. Grid values above ``n``
    use the full-sample leave-one-out fit and raise ``GridClampedWarning``.
    """
    series = as_series(series)
    n = series.n
    grid = simulation_nh_grid() if grid is None else np.asarray(grid, dtype=int)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise DataError("bandwidth grid must be a nonempty increasing sequence")
    if np.any(grid < MIN_WINDOW):
        raise DataError(f"bandwidth grid values must be at least {MIN_WINDOW}")
    # nh beyond n collapses to the full-sample leave-one-out fit
    clamped = bool(np.any(grid > n))
    if clamped:
        warnings.warn(
            f"{int(np.sum(grid > n))} bandwidths exceed n={n} and use the full sample",
            GridClampedWarning,
            stacklevel=2,
        )
    fe = np.array([rolling_forecast_errors(series, h) for h in grid])
    return choose_bandwidth(grid, fe, n, c1, c2, a, clamped)


def robustness_bandwidth(nh_us: int) -> int:
    """``1.5 * nh_us`` rounded half to even."""
    return int(round(1.5 * nh_us))
