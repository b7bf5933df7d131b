"""Point-forecast metrics, the Gaussian NLL metric, Mincer-Zarnowitz regression,
and the level/range discrepancy statistics used in the synthetic comparisons.

With sigma the realized (true) volatility and sigma_hat the forecast:

  MAE    mean |sigma - sigma_hat|
  RMSE   sqrt(mean (sigma - sigma_hat)^2)
  HRMSE  sqrt(mean ((sigma - sigma_hat) / sigma)^2)
  QLIKE  mean (ln sigma + sigma_hat / sigma)

QLIKE follows the published form verbatim: the realization enters the log and
the forecast sits in the numerator of the ratio, which swaps the roles used in
Patton's robust-loss convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, ShapeError, SingularDesignError

__all__ = [
    "MetricRow",
    "point_metrics",
    "nll_metric",
    "mz_regression",
    "delta_stats",
]


@dataclass(frozen=True)
class MetricRow:
    """One model's evaluation row; undefined entries are None."""

    model: str
    mae: float | None = None
    rmse: float | None = None
    hrmse: float | None = None
    qlike: float | None = None
    nll: float | None = None
    r2: float | None = None
    delta_mean: float | None = None
    delta_amplitude: float | None = None


def _aligned(truth, forecast) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(getattr(truth, "values", truth), dtype=float)
    f = np.asarray(getattr(forecast, "values", forecast), dtype=float)
    if t.shape != f.shape or t.ndim != 1 or t.size == 0:
        raise ShapeError("series must be 1-d, non-empty, and aligned")
    return t, f


def point_metrics(truth, forecast) -> dict:
    """MAE, RMSE, HRMSE, QLIKE of a volatility forecast against realizations.

    HRMSE and QLIKE divide by the realization, so they are reported as None
    when any truth value is zero; MAE and RMSE are always defined.
    """
    sigma, sigma_hat = _aligned(truth, forecast)
    err = sigma - sigma_hat
    out = {
        "mae": float(np.mean(np.abs(err))),
        "rmse": float(math.sqrt(np.mean(err**2))),
        "hrmse": None,
        "qlike": None,
    }
    if np.all(sigma > 0):
        out["hrmse"] = float(math.sqrt(np.mean((err / sigma) ** 2)))
        out["qlike"] = float(np.mean(np.log(sigma) + sigma_hat / sigma))
    return out


def nll_metric(returns, forecast) -> float:
    """Average Gaussian negative log density of returns under forecast vols."""
    r, sigma_hat = _aligned(returns, forecast)
    if np.any(sigma_hat <= 0):
        raise InvalidInputError("forecast volatilities must be positive")
    return float(np.mean(0.5 * np.log(2.0 * math.pi * sigma_hat**2) + r**2 / (2.0 * sigma_hat**2)))


def mz_regression(truth, forecast) -> dict:
    """OLS of realizations on (1, forecast): intercept, slope, and R^2."""
    sigma, sigma_hat = _aligned(truth, forecast)
    if sigma.size < 3:
        raise ShapeError("need at least 3 observations")
    if np.ptp(sigma_hat) == 0:
        raise SingularDesignError("constant forecast cannot be regressed on")
    X = np.column_stack([np.ones_like(sigma_hat), sigma_hat])
    coef, *_ = np.linalg.lstsq(X, sigma, rcond=None)
    fitted = X @ coef
    ss_res = float(np.sum((sigma - fitted) ** 2))
    ss_tot = float(np.sum((sigma - sigma.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return {"alpha0": float(coef[0]), "alpha1": float(coef[1]), "r2": r2}


def delta_stats(truth, forecast) -> dict:
    """Signed level and span discrepancies of the forecast path.

    delta_mean = mean(forecast) - mean(truth); delta_amplitude is the same
    difference of ranges, negative when the forecast under-spans the truth.
    """
    sigma, sigma_hat = _aligned(truth, forecast)
    return {
        "delta_mean": float(sigma_hat.mean() - sigma.mean()),
        "delta_amplitude": float(np.ptp(sigma_hat) - np.ptp(sigma)),
    }
