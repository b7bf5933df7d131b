"""GARCH-family conditional variance models estimated by Gaussian maximum likelihood.

Four (1,1) variants share one filter interface.  With I = 1 when the lagged
return is negative:

  garch   var_t = omega + alpha x^2 + beta var
  gjr     var_t = omega + alpha x^2 + gamma x^2 I + beta var
  tarch   var_t = omega + alpha x^2 + gamma |x| I + beta var
  egarch  ln var_t = omega + alpha (|x/sigma| - sqrt(2/pi)) + gamma x/sigma + beta ln var

Estimation runs a derivative-free simplex search in an unconstrained
reparameterization that enforces positivity and stationarity by construction,
from five fixed starting points; the best likelihood wins.
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

__all__ = ["GARCH_VARIANTS", "GarchParams", "garch_filter", "garch_loglik", "fit_garch"]

GARCH_VARIANTS = ("garch", "gjr", "tarch", "egarch")
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_PERSISTENCE_CAP = 1.0 - 1e-6
_LOGVAR_CLAMP = 50.0  # keeps the egarch recursion exp-of-finite


@dataclass(frozen=True)
class GarchParams:
    """Fitted (1,1) parameters; gamma is the asymmetry term, 0 for plain GARCH."""

    variant: str
    omega: float
    alpha: float
    beta: float
    gamma: float = 0.0

    def __post_init__(self):
        if self.variant not in GARCH_VARIANTS:
            raise InvalidInputError(f"unknown variant {self.variant!r}")
        if self.variant == "egarch":
            if abs(self.beta) >= 1:
                raise InvalidInputError("egarch requires |beta| < 1")
            return
        if self.omega <= 0 or self.alpha < 0 or self.beta < 0:
            raise InvalidInputError("need omega > 0 and alpha, beta >= 0")
        persistence = self.alpha + self.beta + (self.gamma / 2 if self.variant == "gjr" else 0.0)
        if persistence >= 1:
            raise InvalidInputError(f"nonstationary parameters: persistence {persistence:.6f}")


@njit(cache=True, nogil=True)
def _filter_kernel(code, omega, alpha, beta, gamma, x, var0):  # pragma: no cover - compiled
    n = x.shape[0]
    var = np.empty(n)
    if code == 3:  # egarch in log variance
        lv = math.log(var0)
        for t in range(n):
            if lv > _LOGVAR_CLAMP:
                lv = _LOGVAR_CLAMP
            elif lv < -_LOGVAR_CLAMP:
                lv = -_LOGVAR_CLAMP
            var[t] = math.exp(lv)
            sd = math.sqrt(var[t])
            z = x[t] / sd
            lv = omega + alpha * (abs(z) - _SQRT_2_OVER_PI) + gamma * z + beta * lv
        return var
    v = var0
    for t in range(n):
        var[t] = v
        xx = x[t] * x[t]
        neg = 1.0 if x[t] < 0.0 else 0.0
        if code == 0:  # garch
            v = omega + alpha * xx + beta * v
        elif code == 1:  # gjr
            v = omega + (alpha + gamma * neg) * xx + beta * v
        else:  # tarch
            v = omega + alpha * xx + gamma * abs(x[t]) * neg + beta * v
    return var


def garch_filter(params: GarchParams, returns) -> np.ndarray:
    """One-step-ahead conditional variance path, started at the sample variance."""
    x = np.asarray(getattr(returns, "values", returns), dtype=float)
    if x.size < 2:
        raise InsufficientDataError("need at least 2 returns")
    var0 = float(np.var(x, ddof=1))
    if var0 <= 0:
        raise DegenerateSeriesError("zero-variance returns")
    code = GARCH_VARIANTS.index(params.variant)
    return _filter_kernel(code, params.omega, params.alpha, params.beta, params.gamma, x, var0)


def garch_loglik(params: GarchParams, returns) -> float:
    """Gaussian log-likelihood -0.5 * sum(ln(2 pi var_t) + x_t^2 / var_t)."""
    x = np.asarray(getattr(returns, "values", returns), dtype=float)
    var = garch_filter(params, x)
    return float(-0.5 * np.sum(np.log(2.0 * math.pi * var) + x**2 / var))


def _sigmoid(u: float) -> float:
    if u >= 0:
        return 1.0 / (1.0 + math.exp(-u))
    e = math.exp(u)
    return e / (1.0 + e)


def _logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def _decode(variant: str, u: np.ndarray) -> GarchParams:
    """Unconstrained vector to valid parameters.

    garch:  omega = e^u0, (alpha, beta) = p * (a, 1-a), p = sig(u1) cap, a = sig(u2)
    gjr:    as garch but (alpha, beta, gamma/2) = p * three-way share split
    tarch:  as garch plus gamma = e^u3
    egarch: omega = u0, alpha = u1, gamma = u2, beta = tanh(u3) cap
    """
    if variant == "egarch":
        return GarchParams("egarch", u[0], u[1], math.tanh(u[3]) * _PERSISTENCE_CAP, u[2])
    omega = math.exp(u[0])
    p = _sigmoid(u[1]) * _PERSISTENCE_CAP
    if variant == "garch":
        a = _sigmoid(u[2])
        return GarchParams("garch", omega, p * a, p * (1.0 - a))
    if variant == "tarch":
        a = _sigmoid(u[2])
        return GarchParams("tarch", omega, p * a, p * (1.0 - a), math.exp(u[3]))
    # gjr: three nonnegative shares of the persistence budget
    e1, e2 = math.exp(u[2]), math.exp(u[3])
    total = 1.0 + e1 + e2
    return GarchParams("gjr", omega, p * e1 / total, p / total, 2.0 * p * e2 / total)


def _starts(variant: str, sample_var: float) -> list[np.ndarray]:
    """Five fixed starting points spanning low-to-high persistence."""
    grid = [(0.90, 0.10), (0.70, 0.30), (0.97, 0.05), (0.50, 0.50), (0.99, 0.10)]
    starts = []
    for p, a in grid:
        if variant == "egarch":
            starts.append(np.array([(1.0 - p) * math.log(sample_var), 0.1, -0.05,
                                    math.atanh(p * 0.999)]))
            continue
        u0 = math.log(sample_var * (1.0 - p))
        u1 = _logit(p / _PERSISTENCE_CAP)
        if variant == "garch":
            starts.append(np.array([u0, u1, _logit(a)]))
        elif variant == "tarch":
            starts.append(np.array([u0, u1, _logit(a), math.log(0.05 * math.sqrt(sample_var))]))
        else:  # gjr shares: alpha = a*p, gamma small
            starts.append(np.array([u0, u1, math.log(a / (1.0 - a - 0.05) + 1e-12),
                                    math.log(0.05 / (1.0 - a - 0.05) + 1e-12)]))
    return starts


def fit_garch(returns, variant: str = "garch") -> GarchParams:
    """Maximum-likelihood fit via Nelder-Mead from 5 deterministic starts.

    The reparameterization guarantees the returned parameters satisfy the
    positivity and stationarity invariants of the variant.
    """
    if variant not in GARCH_VARIANTS:
        raise InvalidInputError(f"unknown variant {variant!r}")
    x = np.asarray(getattr(returns, "values", returns), dtype=float)
    if x.size < 100:
        raise InsufficientDataError("need at least 100 returns")
    sample_var = float(np.var(x, ddof=1))
    if sample_var <= 0:
        raise DegenerateSeriesError("zero-variance returns")

    def objective(u):
        try:
            return -garch_loglik(_decode(variant, u), x)
        except (OverflowError, FloatingPointError):
            return 1e300

    best = None
    for u0 in _starts(variant, sample_var):
        res = minimize(objective, u0, method="Nelder-Mead",
                       options={"maxiter": 4000, "xatol": 1e-8, "fatol": 1e-10})
        value = res.fun if np.isfinite(res.fun) else math.inf
        if best is None or value < best[0]:
            best = (value, res.x)
    if best is None or not np.isfinite(best[0]):
        raise OptimizationFailedError("no start produced a finite likelihood")
    return _decode(variant, best[1])
