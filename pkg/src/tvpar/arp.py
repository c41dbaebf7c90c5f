"""Time-varying AR(p) inference in augmented Dickey-Fuller form.

Within a window the regression is

    Y_t = mu + rho * Y_{t-1} + sum_j beta_j * dY_{t-j} + e_t,   j = 1..p-1,

so ``rho`` is the sum of the AR coefficients. Inference on ``rho`` reuses the
AR(1) tables with the drift rescaled by ``lambda = 1 - sum(beta)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .critical import QuantileTable, psi_of
from .exceptions import (
    SingularDesign,
    TooFewResiduals,
    TvparError,
    WindowTooSmall,
    ZeroStandardError,
    ZeroVarianceResiduals,
)
from .inference import (
    InferencePoint,
    Rho0Grid,
    _resolve,
    failed_point,
    fit_tstats,
    point_from_stats,
)
from .local import MIN_WINDOW, TimeSeries, Window, as_series, local_fit, make_window, t_stat

COND_LIMIT = 1e12
LAG_CHOICES = (1, 6, 12)


def min_count(p: int) -> int:
    """Smallest admissible window count for lag order ``p``."""
    return p + MIN_WINDOW - 1


def make_window_p(n: int, tau: float, nh: int, p: int) -> Window:
    """As :func:`make_window` but leaving room for ``p`` lags."""
    return make_window(n, tau, nh, first=p + 1, min_count=min_count(p))


def _design(series: TimeSeries, window: Window, p: int):
    """``(Y_t, Y_{t-1}, Z)`` with ``Z = (1, dY_{t-1}, ..., dY_{t-p+1})``."""
    if window.t1 < p + 1:
        raise WindowTooSmall(f"window starts at {window.t1}; p={p} needs t1 >= {p + 1}")
    if window.m < min_count(p):
        raise WindowTooSmall(f"window has {window.m} points, p={p} needs {min_count(p)}")
    if window.t2 > series.n:
        raise WindowTooSmall(f"window ends at {window.t2} but n={series.n}")
    y = series.values
    t = np.arange(window.t1, window.t2 + 1)  # 1-indexed dates
    yt = y[t - 1]
    ylag = y[t - 2]
    cols = [np.ones(t.size)]
    for j in range(1, p):
        cols.append(y[t - 1 - j] - y[t - 2 - j])
    return yt, ylag, np.column_stack(cols)


@dataclass(frozen=True)
class AdfFit:
    """Window regression in ADF form.

    ``beta_y`` and ``beta_lag`` are the coefficients of ``Y_t`` and
    ``Y_{t-1}`` on ``Z`` (lag differences only, constant dropped), so the
    nuisance estimate at a hypothesized value is ``beta_y - rho0 * beta_lag``.
    """

    p: int
    rho_hat: float
    beta_hat: np.ndarray
    sigma2_hat: float
    s2_hat: float
    beta_y: np.ndarray
    beta_lag: np.ndarray
    window: Window

    @property
    def m(self) -> int:
        return self.window.m

    def lambda_hat(self, rho0):
        """``1 - sum(beta_hat(rho0))``; affine in ``rho0``."""
        rho0 = np.asarray(rho0, dtype=float)
        out = 1.0 - (self.beta_y.sum() - rho0 * self.beta_lag.sum())
        return float(out) if out.ndim == 0 else out


def adf_fit(series, window: Window, p: int) -> AdfFit:
    """OLS of ``Y_t`` on ``(1, Y_{t-1}, dY_{t-1}, ..., dY_{t-p+1})``.

    Raises
    ------
    SingularDesign
        If the design is rank deficient or its condition number exceeds
        ``COND_LIMIT`` after scaling columns to unit norm.
    """
    if p < 1:
        raise ValueError("p must be at least 1")
    series = as_series(series)
    yt, ylag, Z = _design(series, window, p)
    m = window.m
    X = np.column_stack([Z[:, :1], ylag, Z[:, 1:]])
    norms = np.linalg.norm(X, axis=0)
    if np.any(norms == 0.0):
        raise SingularDesign("a regressor is identically zero")
    if np.linalg.cond(X / norms) > COND_LIMIT:
        raise SingularDesign("regressors are collinear within the window")
    # partial out Z from Y_t and Y_{t-1}
    coef, *_ = np.linalg.lstsq(Z, np.column_stack([yt, ylag]), rcond=None)
    ey = yt - Z @ coef[:, 0]
    ex = ylag - Z @ coef[:, 1]
    sxx = float(ex @ ex)
    rho = float(ex @ ey) / sxx
    resid = ey - rho * ex
    ssr = float(resid @ resid)
    if ssr <= 1e-26 * float(ey @ ey):
        ssr = 0.0
    sigma2 = ssr / m
    beta_y, beta_lag = coef[1:, 0], coef[1:, 1]
    beta = beta_y - rho * beta_lag
    return AdfFit(p, rho, beta, sigma2, sigma2 / (sxx / m), beta_y, beta_lag, window)


def adf_t_stat(series, window: Window, p: int, rho0):
    """``m^(1/2) (rho_hat - rho0) / s_hat`` for the ``Y_{t-1}`` coefficient."""
    series = as_series(series)
    if p == 1:
        return t_stat(local_fit(series, window), rho0)
    fit = adf_fit(series, window, p)
    if not fit.s2_hat > 0.0:
        raise ZeroStandardError("estimated standard error is zero")
    out = math.sqrt(fit.m) * (fit.rho_hat - np.asarray(rho0, dtype=float)) / math.sqrt(fit.s2_hat)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class PsiValue:
    """Drift per candidate and a mask of candidates that fell back to AR(1)."""

    psi: np.ndarray
    fallback: np.ndarray

    @property
    def any_fallback(self) -> bool:
        return bool(np.any(self.fallback))


def psi_from_fit(fit: AdfFit, rho0, nh_effective: Optional[int] = None) -> PsiValue:
    """``-nh ln(rho0) / lambda_hat(rho0)``, or the AR(1) drift where ``lambda_hat <= 0``."""
    nh = fit.m if nh_effective is None else nh_effective
    rho0 = np.asarray(rho0, dtype=float)
    base = np.asarray(psi_of(nh, rho0), dtype=float)
    lam = np.asarray(fit.lambda_hat(rho0), dtype=float)
    bad = lam <= 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(np.isinf(base), np.inf, base / np.where(bad, 1.0, lam))
    psi = np.where(bad, base, scaled)
    return PsiValue(psi, bad & (rho0 < 1.0))


def psi_p(series, window: Window, p: int, rho0, nh_effective: Optional[int] = None) -> PsiValue:
    return psi_from_fit(adf_fit(series, window, p), rho0, nh_effective)


def ar_p_inference(series, tau: float, nh: int, p: int, alpha: float = 0.05,
                   table: Optional[QuantileTable] = None,
                   grid: Optional[Rho0Grid] = None) -> InferencePoint:
    """CI and MUE for the sum of AR coefficients at ``tau``.

    ``p = 1`` is delegated to the AR(1) code path and reproduces it exactly.
    """
    table, grid = _resolve(table, grid)
    series = as_series(series)
    window = None
    flags = []
    try:
        window = make_window_p(series.n, tau, nh, p)
        if p == 1:
            fit = local_fit(series, window)
            tstats, psis = fit_tstats(fit, grid)
        else:
            fit = adf_fit(series, window, p)
            if not fit.s2_hat > 0.0:
                raise ZeroStandardError("estimated standard error is zero")
            tstats = math.sqrt(fit.m) * (fit.rho_hat - grid.points) / math.sqrt(fit.s2_hat)
            pv = psi_from_fit(fit, grid.points)
            psis = pv.psi
            if pv.any_fallback:
                flags.append("nonpositive_lambda")
    except TvparError as exc:
        return failed_point(tau, nh, alpha, exc, window)
    return point_from_stats(tau, nh, alpha, window, fit.rho_hat, tstats, psis, grid, table,
                            extra_flags=flags)


# -- residual diagnostics -------------------------------------------------------


@dataclass(frozen=True)
class LjungBoxResult:
    statistic: float
    lags: int
    p_value: float
    dof: int


def ljung_box(residuals, lags: int = 6) -> LjungBoxResult:
    """Portmanteau test ``Q = m (m + 2) sum_k r_k^2 / (m - k)``, chi-square(``lags``)."""
    e = np.asarray(residuals, dtype=float).ravel()
    m = e.size
    if lags < 1:
        raise ValueError("lags must be positive")
    if m <= lags + 1:
        raise TooFewResiduals(f"{m} residuals cannot support {lags} lags")
    e = e - e.mean()
    denom = float(e @ e)
    if not denom > 0.0:
        raise ZeroVarianceResiduals("residuals have zero variance")
    k = np.arange(1, lags + 1)
    r = np.array([e[j:] @ e[:-j] for j in k]) / denom
    q = float(m * (m + 2) * np.sum(r**2 / (m - k)))
    return LjungBoxResult(q, lags, float(stats.chi2.sf(q, lags)), lags)


def local_residuals(series, nh: int, p: int) -> np.ndarray:
    """Residual at each date ``t`` from the window fit centered at ``t``.

    Dates whose window cannot be fitted are skipped.
    """
    series = as_series(series)
    y = series.values
    n = series.n
    out = []
    for t in range(p + 1, n + 1):
        try:
            window = make_window_p(n, t / n, nh, p)
            fit = adf_fit(series, window, p)
        except TvparError:
            continue
        yt, ylag, Z = _design(series, window, p)
        mu = float(np.mean(yt - fit.rho_hat * ylag - Z[:, 1:] @ fit.beta_hat))
        fitted = mu + fit.rho_hat * y[t - 2] + sum(
            fit.beta_hat[j - 1] * (y[t - 1 - j] - y[t - 2 - j]) for j in range(1, p))
        out.append(y[t - 1] - fitted)
    return np.asarray(out)


def full_sample_residuals(series, p: int) -> np.ndarray:
    """Residuals from one constant-coefficient ADF regression on the whole sample."""
    series = as_series(series)
    window = Window(p + 1, series.n, series.n)
    yt, ylag, Z = _design(series, window, p)
    X = np.column_stack([ylag, Z])
    coef, *_ = np.linalg.lstsq(X, yt, rcond=None)
    return yt - X @ coef


@dataclass(frozen=True)
class LagChoice:
    p: int
    tests: dict
    flags: tuple = ()


def select_lag_order(series, nh: int, choices: Sequence[int] = LAG_CHOICES, lags: int = 6,
                     residuals: str = "local") -> LagChoice:
    """Smallest ``p`` whose residuals pass the Ljung-Box test at 5%.

    ``residuals`` is ``"local"`` (time-varying fit at each date) or ``"full"``
    (constant-coefficient fit). Falls back to the largest ``p`` with a flag.
    """
    if residuals not in ("local", "full"):
        raise ValueError("residuals must be 'local' or 'full'")
    tests = {}
    for p in sorted(choices):
        e = local_residuals(series, nh, p) if residuals == "local" else full_sample_residuals(series, p)
        tests[p] = ljung_box(e, lags)
    for p in sorted(choices):
        if tests[p].p_value >= 0.05:
            return LagChoice(p, tests)
    return LagChoice(max(choices), tests, ("no_lag_order_passes",))
