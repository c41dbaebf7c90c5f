"""CSV ingest and the inflation / real exchange rate transforms."""
from __future__ import annotations

from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from .exceptions import ConfigError, DataError, LengthMismatch, NonpositiveCpi, NonpositiveInput
from .local import TimeSeries

DATE_COLUMN = "date"


def transform_inflation(cpi) -> np.ndarray:
    """Monthly percentage change ``100 (CPI_t - CPI_{t-1}) / CPI_{t-1}``.

    Returns one fewer value than the input.
    """
    cpi = np.asarray(cpi, dtype=float)
    if cpi.ndim != 1 or cpi.size < 2:
        raise DataError("need at least two CPI observations")
    if not np.all(np.isfinite(cpi)) or np.any(cpi <= 0):
        raise NonpositiveCpi("CPI must be positive and finite")
    return 100.0 * np.diff(cpi) / cpi[:-1]


def transform_rex(nex, cpi_dom, cpi_base) -> np.ndarray:
    """Real exchange rate ``nex * cpi_dom / cpi_base``."""
    arrays = [np.asarray(x, dtype=float) for x in (nex, cpi_dom, cpi_base)]
    if len({a.shape for a in arrays}) != 1:
        raise LengthMismatch(f"input lengths differ: {[a.shape for a in arrays]}")
    for a in arrays:
        if not np.all(np.isfinite(a)) or np.any(a <= 0):
            raise NonpositiveInput("exchange rates and price levels must be positive")
    nex, cpi_dom, cpi_base = arrays
    return nex * cpi_dom / cpi_base


def _date_order(dates: pd.Series) -> pd.Series:
    """Sortable view of the date labels: numeric, then calendar, then text."""
    numeric = pd.to_numeric(dates, errors="coerce")
    if numeric.notna().all():
        return numeric
    try:
        return pd.to_datetime(dates, format="mixed")
    except (ValueError, TypeError):
        return dates


def read_panel(path) -> pd.DataFrame:
    """Read a CSV with a ``date`` column and numeric value columns.

    Dates must be strictly increasing and values complete.
    """
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype={DATE_COLUMN: str})
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if DATE_COLUMN not in df.columns:
        raise DataError(f"{path} has no '{DATE_COLUMN}' column")
    if df.shape[1] < 2:
        raise DataError(f"{path} has no value columns")
    if df.isna().any().any():
        bad = [c for c in df.columns if df[c].isna().any()]
        raise DataError(f"missing values in columns {bad}")
    values = df.drop(columns=DATE_COLUMN)
    non_numeric = [c for c in values.columns if not pd.api.types.is_numeric_dtype(values[c])]
    if non_numeric:
        raise DataError(f"non-numeric columns {non_numeric}")
    order = _date_order(df[DATE_COLUMN])
    if not order.is_monotonic_increasing or order.duplicated().any():
        raise DataError("dates must be strictly increasing")
    return df.reset_index(drop=True)


def _column(df: pd.DataFrame, name: Optional[str]) -> np.ndarray:
    if name is None:
        cols = [c for c in df.columns if c != DATE_COLUMN]
        if len(cols) != 1:
            raise DataError(f"several value columns {cols}; name one explicitly")
        name = cols[0]
    if name not in df.columns:
        raise DataError(f"column '{name}' not found")
    return df[name].to_numpy(dtype=float)


def load_series(path, column: Optional[str] = None, transform: str = "none",
                base_column: Optional[str] = None, cpi_column: Optional[str] = None) -> TimeSeries:
    """Read one series and apply a transform.

    ``transform`` is ``"none"``, ``"inflation"`` (``column`` holds CPI) or
    ``"real_exchange_rate"`` (``column`` holds the nominal rate, ``cpi_column``
    the domestic CPI and ``base_column`` the base-country CPI).
    """
    df = read_panel(path)
    dates = df[DATE_COLUMN].tolist()
    if transform == "none":
        return TimeSeries(_column(df, column), tuple(dates))
    if transform == "inflation":
        return TimeSeries(transform_inflation(_column(df, column)), tuple(dates[1:]))
    if transform == "real_exchange_rate":
        if cpi_column is None or base_column is None:
            raise ConfigError("real_exchange_rate needs cpi_column and base_column")
        rex = transform_rex(_column(df, column), _column(df, cpi_column), _column(df, base_column))
        return TimeSeries(rex, tuple(dates))
    raise ConfigError(f"unknown transform '{transform}'")
