"""Heterogeneous autoregression of realized volatility on daily/weekly/monthly lags.

RV_t is regressed by OLS on an intercept, the previous day's RV, and trailing
5-day and 22-day means; the first 22 observations are consumed by the monthly
lag.  Operates on the sigma-scale RV series throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientDataError, SingularDesignError
from ..series import VolSeries

__all__ = ["HarParams", "har_design", "fit_har", "har_forecast"]

_WEEK = 5
_MONTH = 22
_FORECAST_FLOOR = 1e-10  # linear map can stray below zero; keep sigma positive


@dataclass(frozen=True)
class HarParams:
    c: float
    beta_d: float
    beta_w: float
    beta_m: float


def har_design(rv: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Design matrix (1, RV_d, RV_w, RV_m) and targets for t = 22..T-1."""
    T = rv.size
    rows = T - _MONTH
    X = np.empty((rows, 4))
    X[:, 0] = 1.0
    for i, t in enumerate(range(_MONTH, T)):
        X[i, 1] = rv[t - 1]
        X[i, 2] = rv[t - _WEEK : t].mean()
        X[i, 3] = rv[t - _MONTH : t].mean()
    return X, rv[_MONTH:]


def fit_har(rv) -> HarParams:
    """Least-squares fit; raises SingularDesignError on a rank-deficient design."""
    values = np.asarray(getattr(rv, "values", rv), dtype=float)
    if values.size < _MONTH + 1:
        raise InsufficientDataError(f"need more than {_MONTH} observations")
    X, y = har_design(values)
    if not np.isfinite(np.linalg.cond(X)) or np.linalg.cond(X) > 1e12:
        raise SingularDesignError("HAR design is singular (constant RV?)")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return HarParams(*coef)


def har_forecast(params: HarParams, rv) -> VolSeries:
    """One-step-ahead forecasts for every position with a full 22-day history.

    The result is indexed from the 23rd label of the input onward.
    """
    values = np.asarray(getattr(rv, "values", rv), dtype=float)
    index = getattr(rv, "index", tuple(range(values.size)))
    if values.size < _MONTH + 1:
        raise InsufficientDataError(f"need more than {_MONTH} observations")
    X, _ = har_design(values)
    pred = X @ np.array([params.c, params.beta_d, params.beta_w, params.beta_m])
    return VolSeries(index[_MONTH:], np.maximum(pred, _FORECAST_FLOOR))
