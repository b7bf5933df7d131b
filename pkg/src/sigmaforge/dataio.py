"""CSV interchange: intraday bars, daily return/RV files, and forecast files.

All numeric output uses 17 significant digits so float64 values survive a
write/read round trip bit-exactly.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import InsufficientDataError, InvalidInputError
from .series import IntradayBars, ReturnSeries, VolSeries

__all__ = [
    "fmt",
    "load_intraday_csv",
    "load_daily_csv",
    "save_daily_csv",
    "load_forecast_csv",
    "save_forecast_csv",
]


def fmt(x: float) -> str:
    """Format a float with 17 significant digits (bit-stable round trip)."""
    return format(float(x), ".17g")


def _parse_labels(raw: list[str]) -> tuple:
    """Date labels: integers when the whole column parses as int, else strings."""
    try:
        return tuple(int(s) for s in raw)
    except ValueError:
        return tuple(raw)


def _read_rows(path, expected_header: list[str]) -> list[list[str]]:
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InsufficientDataError(f"{path}: empty file") from None
        if [h.strip() for h in header] != expected_header:
            raise InvalidInputError(
                f"{path}: expected header {','.join(expected_header)!r}, got {','.join(header)!r}"
            )
        rows = [row for row in reader if row]
    if not rows:
        raise InsufficientDataError(f"{path}: no data rows")
    return rows


def load_intraday_csv(path) -> IntradayBars:
    """Load `timestamp,price` rows (ISO-8601 timestamps) grouped by calendar day."""
    rows = _read_rows(path, ["timestamp", "price"])
    return IntradayBars.from_rows((ts, float(price)) for ts, price in rows)


def load_daily_csv(path) -> tuple[ReturnSeries, VolSeries]:
    """Load a `date,return,rv` daily file."""
    rows = _read_rows(path, ["date", "return", "rv"])
    labels = _parse_labels([r[0] for r in rows])
    rets = np.array([float(r[1]) for r in rows])
    rv = np.array([float(r[2]) for r in rows])
    return ReturnSeries(labels, rets), VolSeries(labels, rv)


def save_daily_csv(path, returns: ReturnSeries, rv: VolSeries) -> None:
    if returns.index != rv.index:
        raise InvalidInputError("returns and rv must share an index")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "return", "rv"])
        for label, r, v in zip(returns.index, returns.values, rv.values):
            writer.writerow([label, fmt(r), fmt(v)])


def load_forecast_csv(path) -> VolSeries:
    """Load a `date,sigma_hat` forecast file."""
    rows = _read_rows(path, ["date", "sigma_hat"])
    labels = _parse_labels([r[0] for r in rows])
    return VolSeries(labels, np.array([float(r[1]) for r in rows]))


def save_forecast_csv(path, forecast: VolSeries) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "sigma_hat"])
        for label, v in zip(forecast.index, forecast.values):
            writer.writerow([label, fmt(v)])
