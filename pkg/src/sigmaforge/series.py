"""Time-series containers, realized-volatility construction, splits, and summary stats.

Daily returns and volatilities are kept in plain immutable containers indexed
by ordinal day labels (ISO date strings or integers).  Realized volatility is
reported on the sigma scale: the square root of the within-day sum of squared
log returns, so that model forecasts and the RV target live in the same units.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .errors import (
    DegenerateSeriesError,
    InsufficientDataError,
    InvalidInputError,
    ShapeError,
)

__all__ = [
    "ReturnSeries",
    "VolSeries",
    "IntradayBars",
    "DatasetSplit",
    "StatRecord",
    "compute_log_returns",
    "compute_realized_vol",
    "split_series",
    "summary_stats",
]


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.flags.writeable = False
    return arr


def _check_index(index) -> tuple:
    idx = tuple(index)
    if len(idx) == 0:
        raise InsufficientDataError("series index must be non-empty")
    for a, b in zip(idx, idx[1:]):
        if not a < b:
            raise InvalidInputError(f"index not strictly increasing at {a!r} -> {b!r}")
    return idx


@dataclass(frozen=True)
class ReturnSeries:
    """Daily returns indexed by ordinal day labels."""

    index: tuple
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "index", _check_index(self.index))
        vals = _frozen_array(self.values)
        if vals.ndim != 1 or vals.size != len(self.index):
            raise ShapeError("values must be 1-d and aligned with index")
        if not np.all(np.isfinite(vals)):
            raise InvalidInputError("returns must be finite")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.size

    def slice(self, rng: range) -> "ReturnSeries":
        return ReturnSeries(self.index[rng.start : rng.stop], self.values[rng.start : rng.stop])


@dataclass(frozen=True)
class VolSeries:
    """Daily volatilities (sigma scale, nonnegative), aligned with returns when paired."""

    index: tuple
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "index", _check_index(self.index))
        vals = _frozen_array(self.values)
        if vals.ndim != 1 or vals.size != len(self.index):
            raise ShapeError("values must be 1-d and aligned with index")
        if not np.all(np.isfinite(vals)):
            raise InvalidInputError("volatilities must be finite")
        if np.any(vals < 0):
            raise InvalidInputError("volatilities must be >= 0")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.size

    def slice(self, rng: range) -> "VolSeries":
        return VolSeries(self.index[rng.start : rng.stop], self.values[rng.start : rng.stop])


@dataclass(frozen=True)
class IntradayBars:
    """Intraday prices grouped by calendar day.

    ``days`` maps ISO date -> price array; prices must be positive and their
    timestamps strictly increasing within each day.
    """

    days: tuple  # of (iso_date: str, prices: np.ndarray)

    def __post_init__(self):
        seen = []
        frozen = []
        for day, prices in self.days:
            arr = _frozen_array(prices)
            if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"non-positive or non-finite price on {day}")
            frozen.append((day, arr))
            seen.append(day)
        if sorted(seen) != seen or len(set(seen)) != len(seen):
            raise InvalidInputError("days must be unique and in ascending order")
        object.__setattr__(self, "days", tuple(frozen))

    @classmethod
    def from_rows(cls, rows) -> "IntradayBars":
        """Group (timestamp, price) rows by calendar date.

        Rows need not arrive day-grouped, but timestamps must be strictly
        increasing within each day.
        """
        by_day: dict = {}
        last_ts: dict = {}
        for ts, price in rows:
            if isinstance(ts, str):
                ts = datetime.fromisoformat(ts)
            day = ts.date().isoformat()
            if day in last_ts and not last_ts[day] < ts:
                raise InvalidInputError(f"timestamps not strictly increasing on {day}")
            last_ts[day] = ts
            by_day.setdefault(day, []).append(float(price))
        if not by_day:
            raise InsufficientDataError("no intraday rows")
        days = tuple((day, np.asarray(by_day[day])) for day in sorted(by_day))
        return cls(days)


@dataclass(frozen=True)
class DatasetSplit:
    """Contiguous train/valid/test position ranges; test is the suffix."""

    train: range
    valid: range
    test: range


@dataclass(frozen=True)
class StatRecord:
    mean: float
    median: float
    std: float
    skewness: float
    kurtosis: float


def compute_log_returns(prices) -> ReturnSeries:
    """Log returns ln(p[t+1]/p[t]) of a positive price sequence.

    The result is indexed 1..len(prices)-1, labelling each return by the day
    it realizes on.
    """
    arr = np.asarray(prices, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise InsufficientDataError("need at least 2 prices")
    if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
        raise InvalidInputError("prices must be positive and finite")
    rets = np.diff(np.log(arr))
    return ReturnSeries(tuple(range(1, arr.size)), rets)


def compute_realized_vol(bars: IntradayBars) -> tuple[VolSeries, ReturnSeries]:
    """Daily realized volatility and close-to-close returns from intraday bars.

    Per retained day t, RV_t = sqrt(sum_i r_{t,i}^2) over intraday log returns.
    Days with fewer than 2 prices are dropped with a warning.  The first
    retained day has no previous close, so its return is the day's own
    open-to-close log return; later days use ln(close_t / close_{t-1}).
    """
    retained = []
    dropped = []
    for day, prices in bars.days:
        if prices.size < 2:
            dropped.append(day)
        else:
            retained.append((day, prices))
    if dropped:
        warnings.warn(
            f"dropped {len(dropped)} day(s) with fewer than 2 prices: {', '.join(dropped)}",
            UserWarning,
            stacklevel=2,
        )
    if not retained:
        raise InsufficientDataError("no day has at least 2 prices")

    labels = []
    rv = []
    rets = []
    prev_close = None
    for day, prices in retained:
        intraday = np.diff(np.log(prices))
        rv.append(math.sqrt(float(np.dot(intraday, intraday))))
        close = float(prices[-1])
        if prev_close is None:
            rets.append(math.log(close / float(prices[0])))
        else:
            rets.append(math.log(close / prev_close))
        prev_close = close
        labels.append(day)
    return VolSeries(tuple(labels), rv), ReturnSeries(tuple(labels), rets)


def split_series(series, valid_len: int, test_len: int) -> DatasetSplit:
    """Partition positions into train | valid | test with test as the suffix."""
    n = len(series)
    if valid_len < 0 or test_len < 0:
        raise InvalidInputError("split lengths must be nonnegative")
    if n <= valid_len + test_len:
        raise InsufficientDataError(
            f"series length {n} must exceed valid_len + test_len = {valid_len + test_len}"
        )
    n_train = n - valid_len - test_len
    return DatasetSplit(
        train=range(0, n_train),
        valid=range(n_train, n_train + valid_len),
        test=range(n_train + valid_len, n),
    )


def summary_stats(returns: ReturnSeries) -> StatRecord:
    """Mean, median, sample std, and population-moment skewness / raw kurtosis.

    Std uses the n-1 denominator.  Skewness is m3 / m2^(3/2) and kurtosis the
    raw (non-excess) m4 / m2^2, both on population central moments, so a
    normal sample has kurtosis near 3.
    """
    x = returns.values
    if x.size < 4:
        raise InsufficientDataError("need at least 4 observations")
    mean = float(np.mean(x))
    centered = x - mean
    m2 = float(np.mean(centered**2))
    if m2 == 0.0:
        raise DegenerateSeriesError("zero variance")
    m3 = float(np.mean(centered**3))
    m4 = float(np.mean(centered**4))
    return StatRecord(
        mean=mean,
        median=float(np.median(x)),
        std=float(np.std(x, ddof=1)),
        skewness=m3 / m2**1.5,
        kurtosis=m4 / m2**2,
    )
