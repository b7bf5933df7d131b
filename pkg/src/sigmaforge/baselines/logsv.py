"""Quasi-maximum-likelihood stochastic volatility via a linearized state space.

Squaring and logging returns turns the log-variance AR(1) model into a linear
state space with non-Gaussian measurement noise,

    y_t = ln x_t^2 = h_t + u_t,          u_t ~ (E[ln chi2_1], pi^2/2)
    h_t = mu + phi (h_{t-1} - mu) + sigma_eta eta_t,

which a Kalman filter treats as Gaussian; maximizing the resulting
prediction-error likelihood gives the QMLE.  Filtered volatility is
exp(h_{t|t-1} / 2), a genuine one-step-ahead quantity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.optimize import minimize

from ..errors import (
    DegenerateSeriesError,
    InsufficientDataError,
    InvalidInputError,
    OptimizationFailedError,
)

__all__ = ["SvParams", "kalman_filter_ar1", "logsv_filter", "fit_logsv"]

# Moments of ln(chi^2_1): E = digamma(1/2) + ln 2, Var = pi^2 / 2.
LOG_CHI2_MEAN = -1.2703628454614782
LOG_CHI2_VAR = math.pi**2 / 2.0
_RETURN_FLOOR = 1e-10


@dataclass(frozen=True)
class SvParams:
    """Log-variance level, persistence, and innovation scale."""

    mu_h: float
    phi_h: float
    sigma_eta: float

    def __post_init__(self):
        if abs(self.phi_h) >= 1:
            raise InvalidInputError("need |phi_h| < 1")
        if self.sigma_eta <= 0:
            raise InvalidInputError("need sigma_eta > 0")


@njit(cache=True, nogil=True)
def kalman_filter_ar1(y, c, phi, q, obs_offset, r, a0, p0):  # pragma: no cover - compiled
    """Kalman filter for h_t = c + phi h_{t-1} + w_t, y_t = h_t + obs_offset + v_t.

    w ~ N(0, q), v ~ N(0, r), h_0 ~ N(a0, p0 + q adjustments are the caller's
    job).  Returns (predicted state means, predicted state variances,
    Gaussian log-likelihood of the prediction errors).
    """
    n = y.shape[0]
    a_pred = np.empty(n)
    p_pred = np.empty(n)
    loglik = 0.0
    a = a0
    p = p0
    for t in range(n):
        a_pred[t] = a
        p_pred[t] = p
        f = p + r
        v = y[t] - (a + obs_offset)
        loglik += -0.5 * (math.log(2.0 * math.pi) + math.log(f) + v * v / f)
        k = p / f
        a_post = a + k * v
        p_post = p * (1.0 - k)
        a = c + phi * a_post
        p = phi * phi * p_post + q
    return a_pred, p_pred, loglik


def _log_squared(returns: np.ndarray) -> np.ndarray:
    # Zero returns are floored before logging so the observation stays finite.
    return 2.0 * np.log(np.maximum(np.abs(returns), _RETURN_FLOOR))


def _filter_at(params: SvParams, y: np.ndarray):
    q = params.sigma_eta**2
    p0 = q / (1.0 - params.phi_h**2)
    c = params.mu_h * (1.0 - params.phi_h)
    return kalman_filter_ar1(y, c, params.phi_h, q, LOG_CHI2_MEAN, LOG_CHI2_VAR,
                             params.mu_h, p0)


def logsv_filter(params: SvParams, returns) -> np.ndarray:
    """One-step-ahead volatility path exp(h_{t|t-1} / 2)."""
    x = np.asarray(getattr(returns, "values", returns), dtype=float)
    a_pred, _, _ = _filter_at(params, _log_squared(x))
    return np.exp(a_pred / 2.0)


def fit_logsv(returns) -> tuple[SvParams, np.ndarray]:
    """QMLE of (mu_h, phi_h, sigma_eta); returns the fit and its filtered vols.

    Nelder-Mead in (mu, atanh(phi), ln sigma_eta) from three fixed starts.
    """
    x = np.asarray(getattr(returns, "values", returns), dtype=float)
    if x.size < 100:
        raise InsufficientDataError("need at least 100 returns")
    if not np.any(x != 0):
        raise DegenerateSeriesError("all returns are zero")
    y = _log_squared(x)
    y_mean = float(np.mean(y))

    def objective(u):
        params = SvParams(u[0], math.tanh(u[1]) * (1.0 - 1e-8), math.exp(u[2]))
        _, _, ll = _filter_at(params, y)
        return -ll if math.isfinite(ll) else 1e300

    starts = [
        np.array([y_mean - LOG_CHI2_MEAN, math.atanh(0.95), math.log(0.2)]),
        np.array([y_mean - LOG_CHI2_MEAN, math.atanh(0.80), math.log(0.5)]),
        np.array([y_mean - LOG_CHI2_MEAN, math.atanh(0.50), math.log(1.0)]),
    ]
    best = None
    for u0 in starts:
        res = minimize(objective, u0, method="Nelder-Mead",
                       options={"maxiter": 3000, "xatol": 1e-8, "fatol": 1e-10})
        value = res.fun if np.isfinite(res.fun) else math.inf
        if best is None or value < best[0]:
            best = (value, res.x)
    if best is None or not np.isfinite(best[0]):
        raise OptimizationFailedError("stochastic-volatility QMLE failed to converge")
    u = best[1]
    params = SvParams(u[0], math.tanh(u[1]) * (1.0 - 1e-8), math.exp(u[2]))
    return params, logsv_filter(params, x)
