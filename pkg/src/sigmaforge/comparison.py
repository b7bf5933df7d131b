"""Forecast-comparison inference: Diebold-Mariano tests, the model confidence
set, and pairwise forecast-encompassing regressions.

The MCS follows the sequential-elimination scheme with the range statistic:
pairwise mean loss differentials are studentized with circular-block-bootstrap
variances, the worst model is removed, and the reported p-values are running
maxima of the elimination p-values, so the last survivor carries p = 1.
Bootstrap replicates are drawn from substreams indexed by replicate number,
making the procedure deterministic for a given seed regardless of scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import InvalidInputError, ShapeError, SingularDesignError

__all__ = [
    "LossMatrix",
    "McsResult",
    "forecast_losses",
    "dm_test",
    "mcs",
    "encompassing_regression",
    "significance_stars",
    "STAR_LEVELS",
]

# Standard mapping: more stars = stronger evidence.
STAR_LEVELS = ((0.01, "***"), (0.05, "**"), (0.10, "*"))

_DEGENERATE_VAR = 1e-18


@dataclass(frozen=True)
class LossMatrix:
    """Per-model per-period losses, all rows of equal length."""

    models: tuple
    losses: np.ndarray  # shape (n_models, T)

    def __post_init__(self):
        arr = np.asarray(self.losses, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != len(self.models):
            raise ShapeError("losses must be (n_models, T) aligned with model names")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("losses must be finite")
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "losses", arr)


@dataclass(frozen=True)
class McsResult:
    models: tuple
    p_values: dict
    eliminated_order: tuple

    def members(self, level: float) -> tuple:
        """Models retained at confidence ``level`` (p-value >= 1 - level)."""
        threshold = 1.0 - level
        return tuple(m for m in self.models if self.p_values[m] >= threshold)


def forecast_losses(truth, forecast, loss: str) -> np.ndarray:
    """Per-period forecast losses: 'mse' squared errors or 'mad' absolute errors."""
    t = np.asarray(getattr(truth, "values", truth), dtype=float)
    f = np.asarray(getattr(forecast, "values", forecast), dtype=float)
    if t.shape != f.shape:
        raise ShapeError("truth and forecast must be aligned")
    err = t - f
    if loss == "mse":
        return err**2
    if loss == "mad":
        return np.abs(err)
    raise InvalidInputError(f"unknown loss {loss!r}; use 'mse' or 'mad'")


def dm_test(loss_a, loss_b, harvey_correction: bool = False) -> dict:
    """Diebold-Mariano test on the mean loss differential of two forecasts.

    Uses the lag-0 variance, appropriate for 1-step-ahead forecasts whose
    differentials are serially uncorrelated under the null; p-values are
    two-sided normal.  The small-sample Harvey adjustment is off by default.
    """
    a = np.asarray(getattr(loss_a, "values", loss_a), dtype=float)
    b = np.asarray(getattr(loss_b, "values", loss_b), dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError("loss sequences must be 1-d and aligned")
    n = a.size
    if n < 10:
        raise ShapeError("need at least 10 observations")
    d = a - b
    mean_d = float(np.mean(d))
    var_d = float(np.var(d, ddof=1))
    if var_d < _DEGENERATE_VAR:
        if mean_d == 0.0:
            return {"stat": 0.0, "p_value": 1.0}
        return {"stat": math.copysign(math.inf, mean_d), "p_value": 0.0}
    stat = mean_d / math.sqrt(var_d / n)
    if harvey_correction:
        stat *= math.sqrt((n - 1) / n)  # h = 1 case of the Harvey et al. factor
    return {"stat": float(stat), "p_value": float(2.0 * stats.norm.sf(abs(stat)))}


def _block_bootstrap_means(losses: np.ndarray, n_boot: int, block_len: int, seed) -> np.ndarray:
    """Bootstrap replicate means per model via circular blocks, substreamed by
    replicate index; shape (n_boot, n_models)."""
    n_models, T = losses.shape
    n_blocks = math.ceil(T / block_len)
    out = np.empty((n_boot, n_models))
    offsets = np.arange(block_len)
    for b in range(n_boot):
        rng = np.random.default_rng(np.random.SeedSequence((seed, b)))
        starts = rng.integers(0, T, size=n_blocks)
        idx = ((starts[:, None] + offsets[None, :]) % T).reshape(-1)[:T]
        out[b] = losses[:, idx].mean(axis=1)
    return out


def mcs(losses: LossMatrix, n_boot: int = 10_000, level: float = 0.05,
        block_len: int | None = None, seed: int = 0) -> McsResult:
    """Model confidence set p-values by sequential range-statistic elimination.

    ``level`` is retained for interface symmetry with the published procedure;
    membership at any confidence level can be read off the p-values.
    """
    if len(losses.models) < 2:
        raise InvalidInputError("need at least 2 models")
    T = losses.losses.shape[1]
    if T < 50:
        raise ShapeError("need at least 50 loss observations")
    if block_len is None:
        block_len = math.ceil(T ** (1.0 / 3.0))

    sample_means = losses.losses.mean(axis=1)
    spread = np.abs(sample_means[:, None] - sample_means[None, :])
    if float(spread.max(initial=0.0)) < 1e-15 and float(np.ptp(losses.losses, axis=1).max()) < 1e-15:
        # All models identical: nothing to eliminate.
        return McsResult(losses.models, {m: 1.0 for m in losses.models}, ())

    boot_means = _block_bootstrap_means(losses.losses, n_boot, block_len, seed)

    active = list(range(len(losses.models)))
    p_values = {}
    eliminated = []
    running_max = 0.0
    while len(active) > 1:
        ix = np.array(active)
        mean_diff = sample_means[ix][:, None] - sample_means[ix][None, :]
        boot_diff = boot_means[:, ix][:, :, None] - boot_means[:, ix][:, None, :]
        centered = boot_diff - mean_diff[None, :, :]
        var_diff = np.mean(centered**2, axis=0)
        np.fill_diagonal(var_diff, 1.0)  # diagonal unused
        scale = np.sqrt(np.maximum(var_diff, _DEGENERATE_VAR))
        t_stats = mean_diff / scale
        t_range = float(np.max(np.abs(t_stats)))
        boot_range = np.max(np.abs(centered / scale[None, :, :]), axis=(1, 2))
        p_elim = float(np.mean(boot_range >= t_range))
        running_max = max(running_max, p_elim)
        worst_local = int(np.argmax(np.max(t_stats, axis=1)))
        worst = active[worst_local]
        p_values[losses.models[worst]] = running_max
        eliminated.append(losses.models[worst])
        active.remove(worst)
    p_values[losses.models[active[0]]] = 1.0
    return McsResult(losses.models, p_values, tuple(eliminated))


def significance_stars(p_value: float) -> str:
    for threshold, stars in STAR_LEVELS:
        if p_value <= threshold:
            return stars
    return ""


def _newey_west_cov(X: np.ndarray, resid: np.ndarray, lags: int) -> np.ndarray:
    """HAC sandwich covariance with Bartlett weights."""
    n, k = X.shape
    xu = X * resid[:, None]
    S = xu.T @ xu / n
    for lag in range(1, lags + 1):
        w = 1.0 - lag / (lags + 1.0)
        gamma = xu[lag:].T @ xu[:-lag] / n
        S += w * (gamma + gamma.T)
    xtx_inv = np.linalg.inv(X.T @ X / n)
    return xtx_inv @ S @ xtx_inv / n


def encompassing_regression(truth, forecast_i, forecast_j, hac_lags: int = 5) -> dict:
    """Joint regression of realizations on two competing forecasts.

    OLS with intercept; Newey-West standard errors (5 lags); two-sided normal
    p-values with the standard star mapping (*** at 1%, ** at 5%, * at 10%).
    """
    y = np.asarray(getattr(truth, "values", truth), dtype=float)
    fi = np.asarray(getattr(forecast_i, "values", forecast_i), dtype=float)
    fj = np.asarray(getattr(forecast_j, "values", forecast_j), dtype=float)
    if not (y.shape == fi.shape == fj.shape) or y.ndim != 1:
        raise ShapeError("series must be 1-d and aligned")
    if y.size < 30:
        raise ShapeError("need at least 30 observations")
    X = np.column_stack([np.ones_like(y), fi, fj])
    if np.linalg.cond(X) > 1e10:
        raise SingularDesignError("forecasts are collinear")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    cov = _newey_west_cov(X, resid, hac_lags)
    se = np.sqrt(np.diag(cov))
    p = 2.0 * stats.norm.sf(np.abs(coef / se))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 0.0
    return {
        "alpha0": float(coef[0]),
        "alpha1": float(coef[1]),
        "alpha2": float(coef[2]),
        "p1": float(p[1]),
        "p2": float(p[2]),
        "stars1": significance_stars(float(p[1])),
        "stars2": significance_stars(float(p[2])),
        "r2": r2,
    }
