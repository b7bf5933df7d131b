"""Synthetic data generators: sine-volatility returns, GARCH(1,1) paths, Heston paths.

All generators draw from numpy's PCG64 generator seeded explicitly, so paths
are bit-reproducible for a given seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .series import ReturnSeries, VolSeries

__all__ = [
    "SineVolConfig",
    "HestonParams",
    "gen_sine_vol",
    "sim_garch11",
    "sim_heston",
]

GARCH_BURN_IN = 500


@dataclass(frozen=True)
class SineVolConfig:
    """Cyclical volatility: sigma_i = 1 + amplitude * sin(pi * i / half_period)."""

    n: int = 2000
    amplitude: float = 0.7
    half_period: float = 50.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise InvalidInputError("n must be >= 2")
        if not 0.0 <= self.amplitude < 1.0:
            raise InvalidInputError("amplitude must lie in [0, 1) to keep sigma positive")
        if self.half_period <= 0:
            raise InvalidInputError("half_period must be positive")


@dataclass(frozen=True)
class HestonParams:
    """Square-root variance diffusion parameters (per-step units)."""

    mu: float = 0.0
    kappa: float = 1.0
    theta: float = 0.04
    sigma_v: float = 0.3
    v0: float = 0.04
    s0: float = 100.0
    rho: float = -0.5

    def __post_init__(self):
        if min(self.kappa, self.theta, self.sigma_v, self.v0, self.s0) < 0:
            raise InvalidInputError("kappa, theta, sigma_v, v0, s0 must be >= 0")
        if abs(self.rho) > 1:
            raise InvalidInputError("|rho| must be <= 1")


def gen_sine_vol(cfg: SineVolConfig) -> tuple[VolSeries, ReturnSeries]:
    """Generate the cyclical-volatility benchmark series.

    sigma_i = 1 + A sin(pi i / B) for i = 0..n-1, r_i = sigma_i * eps_i with
    eps_i iid standard normal.
    """
    i = np.arange(cfg.n)
    sigma = 1.0 + cfg.amplitude * np.sin(math.pi * i / cfg.half_period)
    eps = np.random.default_rng(cfg.seed).standard_normal(cfg.n)
    r = sigma * eps
    index = tuple(range(cfg.n))
    return VolSeries(index, sigma), ReturnSeries(index, r)


def sim_garch11(
    omega: float, alpha: float, beta: float, n: int, seed: int = 0
) -> tuple[VolSeries, ReturnSeries]:
    """Simulate x_t ~ N(0, sigma_t^2) with sigma_t^2 = omega + alpha x_{t-1}^2 + beta sigma_{t-1}^2.

    Starts from the unconditional variance omega / (1 - alpha - beta) and
    discards a 500-step burn-in.
    """
    if omega <= 0 or alpha < 0 or beta < 0:
        raise InvalidInputError("need omega > 0 and alpha, beta >= 0")
    if alpha + beta >= 1:
        raise InvalidInputError("nonstationary parameters: alpha + beta must be < 1")
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    total = n + GARCH_BURN_IN
    z = np.random.default_rng(seed).standard_normal(total)
    var = np.empty(total)
    x = np.empty(total)
    v = omega / (1.0 - alpha - beta)
    for t in range(total):
        var[t] = v
        x[t] = math.sqrt(v) * z[t]
        v = omega + alpha * x[t] * x[t] + beta * v
    index = tuple(range(n))
    return (
        VolSeries(index, np.sqrt(var[GARCH_BURN_IN:])),
        ReturnSeries(index, x[GARCH_BURN_IN:]),
    )


def sim_heston(
    params: HestonParams, n_days: int, steps_per_day: int, seed: int = 0
) -> tuple[np.ndarray, VolSeries]:
    """Full-truncation Euler simulation of the square-root variance diffusion.

    dt = 1 / steps_per_day.  The variance state may go negative but is floored
    at zero inside every drift and diffusion term, so reported variances stay
    nonnegative.  Returns daily closing prices and the daily volatility
    sqrt(mean intraday variance).
    """
    if n_days < 1 or steps_per_day < 1:
        raise InvalidInputError("n_days and steps_per_day must be >= 1")
    dt = 1.0 / steps_per_day
    sqrt_dt = math.sqrt(dt)
    rng = np.random.default_rng(seed)
    z1 = rng.standard_normal((n_days, steps_per_day))
    z2 = rng.standard_normal((n_days, steps_per_day))
    dw1 = z1 * sqrt_dt
    dw2 = (params.rho * z1 + math.sqrt(1.0 - params.rho**2) * z2) * sqrt_dt

    s = params.s0
    v = params.v0
    closes = np.empty(n_days)
    daily_vol = np.empty(n_days)
    for day in range(n_days):
        v_sum = 0.0
        for k in range(steps_per_day):
            v_plus = max(v, 0.0)
            v_sum += v_plus
            s = s + params.mu * s * dt + math.sqrt(v_plus) * s * dw1[day, k]
            v = v + params.kappa * (params.theta - v_plus) * dt + params.sigma_v * math.sqrt(
                v_plus
            ) * dw2[day, k]
        closes[day] = s
        daily_vol[day] = math.sqrt(v_sum / steps_per_day)
    return closes, VolSeries(tuple(range(n_days)), daily_vol)
