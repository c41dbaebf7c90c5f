"""Quantiles of the local-to-unity limit law of the t-statistic.

The limit law is indexed by a drift ``psi`` in ``[0, inf]``: ``psi = 0`` is the
demeaned Dickey-Fuller distribution and ``psi = inf`` is standard normal. The
embedded table was tabulated from 300,000 AR(1) paths of length 25,000;
:func:`simulate_quantiles` regenerates entries with the same protocol.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import signal, stats

from .exceptions import AlphaNotInTable, InvalidGrid, RhoAboveOne

TABLE_ALPHAS = (0.025, 0.05, 0.5, 0.95, 0.975)

# fmt: off
TABLE_PSI = (
    0, 0.2, 0.4, 0.6, 0.8, 1, 1.4, 1.8, 2.2, 2.6, 3, 3.4, 3.8,
    4.2, 4.6, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15,
    20, 25, 30, 40, 50, 60, 70, 80, 90, 100, 200, 300, 500,
)
# rows are alpha levels, columns follow TABLE_PSI
_TABLE_VALUES = (
    (-3.12, -3.09, -3.05, -3.03, -2.99, -2.98, -2.93, -2.89, -2.85, -2.82, -2.79, -2.77, -2.74,
     -2.72, -2.70, -2.68, -2.65, -2.60, -2.58, -2.56, -2.54, -2.51, -2.50, -2.48, -2.46, -2.45,
     -2.39, -2.35, -2.32, -2.28, -2.25, -2.23, -2.20, -2.19, -2.17, -2.17, -2.11, -2.08, -2.05),
    (-2.86, -2.83, -2.79, -2.76, -2.72, -2.70, -2.65, -2.61, -2.57, -2.53, -2.51, -2.48, -2.46,
     -2.44, -2.41, -2.39, -2.35, -2.31, -2.28, -2.26, -2.23, -2.21, -2.19, -2.18, -2.15, -2.14,
     -2.08, -2.05, -2.02, -1.96, -1.94, -1.91, -1.89, -1.88, -1.86, -1.85, -1.80, -1.76, -1.74),
    (-1.57, -1.51, -1.47, -1.42, -1.37, -1.34, -1.26, -1.20, -1.14, -1.08, -1.03, -1.00, -0.96,
     -0.92, -0.90, -0.86, -0.81, -0.75, -0.71, -0.68, -0.65, -0.62, -0.59, -0.58, -0.55, -0.54,
     -0.47, -0.42, -0.39, -0.33, -0.30, -0.27, -0.25, -0.23, -0.23, -0.21, -0.15, -0.12, -0.09),
    (-0.09, -0.02, 0.03, 0.08, 0.13, 0.17, 0.24, 0.31, 0.37, 0.42, 0.48, 0.53, 0.56,
     0.60, 0.64, 0.68, 0.75, 0.82, 0.86, 0.91, 0.95, 0.98, 1.02, 1.04, 1.05, 1.08,
     1.15, 1.20, 1.24, 1.30, 1.33, 1.37, 1.39, 1.40, 1.41, 1.43, 1.49, 1.52, 1.55),
    (0.23, 0.30, 0.36, 0.40, 0.45, 0.49, 0.55, 0.63, 0.69, 0.74, 0.79, 0.84, 0.87,
     0.91, 0.94, 0.99, 1.05, 1.12, 1.17, 1.22, 1.25, 1.29, 1.32, 1.34, 1.37, 1.39,
     1.46, 1.51, 1.56, 1.61, 1.65, 1.67, 1.71, 1.72, 1.72, 1.74, 1.80, 1.83, 1.87),
)
# fmt: on


@dataclass(frozen=True)
class QuantileTable:
    """Critical values ``c_psi(alpha)`` on a finite ``psi`` grid plus ``psi = inf``.

    Attributes
    ----------
    psi : ndarray
        Strictly increasing finite drift values.
    alphas : ndarray
        Quantile levels.
    values : ndarray
        ``values[i, j]`` is the ``alphas[j]`` quantile at ``psi[i]``.
    provenance : dict
        ``{"source": "embedded"}`` or ``{"source": "simulated", "B": ..., "n": ..., "seed": ...}``.
    """

    psi: np.ndarray
    alphas: np.ndarray
    values: np.ndarray
    provenance: dict = field(default_factory=lambda: {"source": "embedded"})

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=float)
        alphas = np.asarray(self.alphas, dtype=float)
        values = np.asarray(self.values, dtype=float).reshape(psi.size, alphas.size)
        if psi.size == 0 or np.any(~np.isfinite(psi)) or np.any(psi < 0):
            raise InvalidGrid("psi grid must be finite and nonnegative")
        if np.any(np.diff(psi) <= 0):
            raise InvalidGrid("psi grid must be strictly increasing")
        if np.any((alphas <= 0) | (alphas >= 1)) or np.any(np.diff(alphas) <= 0):
            raise InvalidGrid("alphas must be increasing levels in (0, 1)")
        for arr in (psi, alphas, values):
            arr.setflags(write=False)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "values", values)

    @property
    def inf_row(self) -> np.ndarray:
        return stats.norm.ppf(self.alphas)

    def alpha_index(self, alpha: float) -> int:
        hits = np.flatnonzero(np.isclose(self.alphas, alpha, rtol=0, atol=1e-9))
        if hits.size == 0:
            raise AlphaNotInTable(f"alpha={alpha} not in table levels {self.alphas.tolist()}")
        return int(hits[0])

    def column(self, alpha: float) -> np.ndarray:
        return self.values[:, self.alpha_index(alpha)]


def embedded_table() -> QuantileTable:
    return QuantileTable(
        np.array(TABLE_PSI, dtype=float),
        np.array(TABLE_ALPHAS),
        np.array(_TABLE_VALUES).T,
        {"source": "embedded"},
    )


def psi_of(nh_effective, rho0):
    """Local-to-unity drift ``-nh * ln(rho0)``; ``inf`` for ``rho0 <= 0``.

    Vectorized in ``rho0``.
    """
    if not nh_effective > 0:
        raise ValueError("nh_effective must be positive")
    rho0 = np.asarray(rho0, dtype=float)
    if np.any(rho0 > 1.0):
        raise RhoAboveOne("rho0 must not exceed one")
    out = np.full(rho0.shape, np.inf)
    pos = rho0 > 0
    # -0.0 at rho0 == 1 is normalized to 0.0
    out[pos] = np.abs(-nh_effective * np.log(rho0[pos]))
    return float(out) if out.ndim == 0 else out


def critical_value(table: QuantileTable, psi, alpha: float):
    """Quantile ``c_psi(alpha)`` with interpolation between grid rows.

    Rows are interpolated linearly in ``log(1 + psi)``. Above the largest grid
    value the curve is linear in ``1 / (1 + psi)`` between the last row and
    the normal quantile, which it reaches at ``psi = inf``.
    """
    j = table.alpha_index(alpha)
    col = table.values[:, j]
    c_inf = float(table.inf_row[j])
    psi = np.asarray(psi, dtype=float)
    if np.any(psi < 0) or np.any(np.isnan(psi)):
        raise ValueError("psi must be nonnegative")
    out = np.empty(psi.shape)
    top = table.psi[-1]
    inside = psi <= top
    out[inside] = np.interp(np.log1p(psi[inside]), np.log1p(table.psi), col)
    above = ~inside
    if np.any(above):
        w = (1.0 / (1.0 + psi[above])) * (1.0 + top)
        out[above] = c_inf + (col[-1] - c_inf) * w
    return float(out) if out.ndim == 0 else out


# -- simulation ---------------------------------------------------------------

_CHUNK = 1000


def _path_rng(seed: int, psi_index: int, path_index: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(psi_index, path_index)))
    )


def ar1_tstats(paths: np.ndarray, rho) -> np.ndarray:
    """Full-sample t-statistics for rows of ``paths`` (each ``Y_0..Y_n``).

    Regression of ``Y_t`` on ``(1, Y_{t-1})`` over ``t = 1..n``, identical to
    :func:`tvpar.local.local_fit` on the whole path.
    """
    yt = paths[:, 1:]
    ylag = paths[:, :-1]
    m = yt.shape[1]
    dy = yt - yt.mean(axis=1, keepdims=True)
    dx = ylag - ylag.mean(axis=1, keepdims=True)
    sxx = np.einsum("ij,ij->i", dx, dx)
    rho_hat = np.einsum("ij,ij->i", dx, dy) / sxx
    resid = dy - rho_hat[:, None] * dx
    sigma2 = np.einsum("ij,ij->i", resid, resid) / m
    s2 = sigma2 / (sxx / m)
    return np.sqrt(m) * (rho_hat - rho) / np.sqrt(s2)


def _simulate_chunk(args) -> np.ndarray:
    seed, psi_index, psi, start, stop, n_path = args
    rho = math.exp(-psi / n_path)
    draws = np.empty((stop - start, n_path + 1))
    for k, j in enumerate(range(start, stop)):
        draws[k] = _path_rng(seed, psi_index, j).standard_normal(n_path + 1)
    if psi > 0:
        y0 = draws[:, 0] / math.sqrt(1.0 - rho * rho)
    else:
        y0 = np.zeros(stop - start)
    paths = np.empty_like(draws)
    paths[:, 0] = y0
    paths[:, 1:], _ = signal.lfilter(
        [1.0], [1.0, -rho], draws[:, 1:], axis=1, zi=(rho * y0)[:, None]
    )
    return ar1_tstats(paths, rho)


def _n_workers(n_jobs: Optional[int]) -> int:
    if n_jobs is None:
        n_jobs = int(os.environ.get("TVPAR_NUM_WORKERS", "1"))
    return max(1, n_jobs)


def simulate_statistics(
    psi: float, B: int, n_path: int, seed: int, psi_index: int = 0, n_jobs=None
) -> np.ndarray:
    """The ``B`` simulated t-statistics for one drift value, in path order."""
    jobs = [
        (seed, psi_index, float(psi), s, min(s + _CHUNK, B), n_path)
        for s in range(0, B, _CHUNK)
    ]
    workers = _n_workers(n_jobs)
    if workers == 1:
        parts = [_simulate_chunk(job) for job in jobs]
    else:
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_simulate_chunk, jobs))
    return np.concatenate(parts)


def simulate_quantiles(
    psi_grid: Sequence[float],
    alphas: Sequence[float] = TABLE_ALPHAS,
    B: int = 300_000,
    n_path: int = 25_000,
    seed: int = 0,
    n_jobs: Optional[int] = None,
) -> QuantileTable:
    """Monte Carlo regeneration of ``c_psi(alpha)``.

    For each ``psi`` draws ``B`` AR(1) paths of length ``n_path`` with
    ``rho = exp(-psi / n_path)``, N(0, 1) innovations and a stationary start
    (``Y_0 = 0`` when ``psi = 0``), computes the t-statistic at the true
    ``rho`` on each path, and takes type-7 empirical quantiles. Path ``j`` of
    grid entry ``i`` draws from its own stream keyed by ``(seed, i, j)``, so
    the table does not depend on ``n_jobs``.
    """
    psi_grid = np.asarray(psi_grid, dtype=float)
    if B < 1000 or n_path < 500:
        raise InvalidGrid("need B >= 1000 and n_path >= 500")
    if psi_grid.size == 0 or not np.all(np.isfinite(psi_grid)) or np.any(psi_grid < 0):
        raise InvalidGrid("psi values must be finite and nonnegative")
    values = np.empty((psi_grid.size, len(alphas)))
    for i, psi in enumerate(psi_grid):
        tstats = simulate_statistics(psi, B, n_path, seed, i, n_jobs)
        values[i] = np.quantile(tstats, alphas)
    order = np.argsort(psi_grid)
    return QuantileTable(
        psi_grid[order],
        np.asarray(alphas, dtype=float),
        values[order],
        {"source": "simulated", "B": int(B), "n": int(n_path), "seed": int(seed)},
    )


def quantile_se(alpha: float, B: int, density: float) -> float:
    """Asymptotic standard error of an empirical ``alpha`` quantile."""
    return math.sqrt(alpha * (1 - alpha) / B) / density


# -- serialization ------------------------------------------------------------


def write_table(table: QuantileTable, path) -> Path:
    """Write ``psi,alpha,value`` CSV plus a JSON provenance sidecar."""
    path = Path(path)
    lines = ["psi,alpha,value"]
    for i, psi in enumerate(table.psi):
        for j, a in enumerate(table.alphas):
            lines.append(f"{float(psi)!r},{float(a)!r},{float(table.values[i, j])!r}")
    for j, a in enumerate(table.alphas):
        lines.append(f"inf,{float(a)!r},{float(table.inf_row[j])!r}")
    path.write_text("\n".join(lines) + "\n")
    path.with_suffix(".json").write_text(json.dumps(table.provenance, indent=2) + "\n")
    return path


def read_table(path) -> QuantileTable:
    path = Path(path)
    rows = [ln.split(",") for ln in path.read_text().splitlines()[1:] if ln.strip()]
    finite = [(float(p), float(a), float(v)) for p, a, v in rows if p.strip() != "inf"]
    psis = sorted({r[0] for r in finite})
    alphas = sorted({r[1] for r in finite})
    values = np.full((len(psis), len(alphas)), np.nan)
    for p, a, v in finite:
        values[psis.index(p), alphas.index(a)] = v
    if np.isnan(values).any():
        raise InvalidGrid(f"{path}: table is not a full psi x alpha grid")
    sidecar = path.with_suffix(".json")
    provenance = json.loads(sidecar.read_text()) if sidecar.exists() else {"source": "file"}
    return QuantileTable(np.array(psis), np.array(alphas), values, provenance)
