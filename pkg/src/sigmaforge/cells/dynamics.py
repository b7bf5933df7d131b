"""Forward recursions shared by all five cell variants.

The per-step update is written once against a tiny algebra interface and runs
either on numpy floats (filtering, forecasting) or on tape recorder handles
(gradient-based fitting), so both paths evaluate the identical expression
graph.  Per step, with x the previous observed return:

  residual   x~ = x                      (base)
             x~ = x - sqrt(prev var) * eps        (n, ntv; reparameterized)
             x~ = x - g,  g = tanh(tanh(x w_xh + h w_hh + b) . w_ho + b)   (rl, rltv)
  weights    (w_s, w_r) static, or sigmoid(w_gen x + b_gen) split in half (ntv, rltv)
  hidden     s' = AdjustedSoftplus(s o w_s + x~^2 w_r + b_h)   (elementwise)
  output     var = max(relu(s' . w_o + b_o), floor)

The output variance is therefore a function of information through t-1 only.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import NonFiniteError, ShapeError
from ..nn import adjusted_softplus
from .config import CellState, SigmaCellConfig, SigmaCellModel

__all__ = ["cell_step", "initial_state", "run_sequence", "nll_loss", "forecast_paths"]


class NumpyOps:
    """Concrete float/ndarray algebra."""

    @staticmethod
    def sqrt(x):
        return math.sqrt(x)

    @staticmethod
    def tanh(x):
        return math.tanh(x)

    @staticmethod
    def relu(x):
        return x if x > 0.0 else 0.0

    @staticmethod
    def max_const(x, c):
        return x if x > c else c

    @staticmethod
    def dot(u, v):
        return float(np.dot(u, v))

    @staticmethod
    def vscale(s, v):
        return s * v

    @staticmethod
    def vmul(u, v):
        return u * v

    @staticmethod
    def vadd(u, v):
        return u + v

    @staticmethod
    def vadd3(u, v, w):
        return u + v + w

    @staticmethod
    def vtanh(v):
        return np.tanh(v)

    @staticmethod
    def vsigmoid(v):
        out = np.empty_like(v)
        pos = v >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
        ev = np.exp(v[~pos])
        out[~pos] = ev / (1.0 + ev)
        return out

    @staticmethod
    def vadjsp(v, beta):
        return adjusted_softplus(v, beta)

    @staticmethod
    def matvec_right(h, w):  # row vector times matrix: out_j = sum_i h_i w[i, j]
        return h @ w


class TapeOps:
    """Recording algebra over ``autodiff`` handles; vectors are Python lists."""

    def __init__(self, builder):
        self.tb = builder

    def sqrt(self, x):
        return self.tb.sqrt(x)

    def tanh(self, x):
        return self.tb.tanh(x)

    def relu(self, x):
        return self.tb.relu(x)

    def max_const(self, x, c):
        return self.tb.max_const(x, c)

    @staticmethod
    def dot(u, v):
        acc = u[0] * v[0]
        for a, b in zip(u[1:], v[1:]):
            acc = acc + a * b
        return acc

    @staticmethod
    def vscale(s, v):
        return [s * x for x in v]

    @staticmethod
    def vmul(u, v):
        return [a * b for a, b in zip(u, v)]

    @staticmethod
    def vadd(u, v):
        return [a + b for a, b in zip(u, v)]

    @staticmethod
    def vadd3(u, v, w):
        return [a + b + c for a, b, c in zip(u, v, w)]

    def vtanh(self, v):
        return [self.tb.tanh(x) for x in v]

    def vsigmoid(self, v):
        return [self.tb.sigmoid(x) for x in v]

    def vadjsp(self, v, beta):
        return [self.tb.adjusted_softplus(x, beta) for x in v]

    @staticmethod
    def matvec_right(h, w):  # w is a list of rows
        m = len(w[0])
        return [TapeOps.dot(h, [row[j] for row in w]) for j in range(m)]


def generic_step(ops, config: SigmaCellConfig, blocks, state: CellState, x_prev, eps):
    """One recurrence step; returns (new state, output variance, g, residual x~).

    ``g`` is None for variants without a mean-prediction layer.
    """
    n = config.hidden
    h = state.h
    g = None
    if config.stochastic:
        x_t = x_prev - ops.sqrt(state.sigma_sq_prev) * eps
    elif config.has_residual_rnn:
        pre_h = ops.vadd3(
            ops.vscale(x_prev, blocks["w_xh"]),
            ops.matvec_right(state.h, blocks["w_hh"]),
            blocks["b_hr"],
        )
        h = ops.vtanh(pre_h)
        g = ops.tanh(ops.dot(h, blocks["w_ho"]) + blocks["b_or"][0])
        x_t = x_prev - g
    else:
        x_t = x_prev

    if config.time_varying:
        w_all = ops.vsigmoid(ops.vadd(ops.vscale(x_prev, blocks["w_gen"]), blocks["b_gen"]))
        w_s, w_r = w_all[:n], w_all[n:]
    else:
        w_s, w_r = blocks["w_s"], blocks["w_r"]

    x_sq = x_t * x_t
    pre = ops.vadd3(ops.vmul(state.sigma_tilde_sq, w_s), ops.vscale(x_sq, w_r), blocks["b_h"])
    s_new = ops.vadjsp(pre, config.beta_act)
    z = ops.dot(s_new, blocks["w_o"]) + blocks["b_o"][0]
    var_out = ops.max_const(ops.relu(z), config.variance_floor)
    return CellState(s_new, h, var_out), var_out, g, x_t


def _check_finite_state(state: CellState, var_out: float, t: int) -> None:
    if not math.isfinite(var_out) or not np.all(np.isfinite(state.sigma_tilde_sq)):
        raise NonFiniteError(f"non-finite cell state at step {t}")


def cell_step(model: SigmaCellModel, state: CellState, x_prev: float, noise: float = 0.0
              ) -> tuple[CellState, float, float]:
    """Advance one step; returns (state', sigma_t^2, mean prediction g_t)."""
    new_state, var_out, g, _ = generic_step(
        NumpyOps, model.config, model.blocks(), state, float(x_prev), float(noise)
    )
    _check_finite_state(new_state, var_out, -1)
    return new_state, var_out, 0.0 if g is None else g


def initial_state(model: SigmaCellModel, returns) -> CellState:
    """Warm start: hidden variance filled with the sample variance of ``returns``."""
    values = np.asarray(returns, dtype=float)
    v0 = float(np.var(values, ddof=1)) if values.size > 1 else float(values[0] ** 2)
    v0 = max(v0, model.config.variance_floor)
    h0 = np.zeros(model.config.res_hidden) if model.config.has_residual_rnn else None
    return CellState(np.full(model.config.hidden, v0), h0, v0)


def run_sequence(model: SigmaCellModel, returns, rng: np.random.Generator | None = None
                 ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Filter a return sequence; returns (variance path, g path, residual path).

    Stochastic variants draw their noise from ``rng``; pass None for the
    deterministic (eps = 0) pass.  The variance at position t depends only on
    returns before t; the first step sees no data beyond the warm start.
    """
    values = np.asarray(getattr(returns, "values", returns), dtype=float)
    if values.size < 1:
        raise ShapeError("returns must be non-empty")
    T = values.size
    if model.config.stochastic and rng is not None:
        eps = rng.standard_normal(T)
    else:
        eps = np.zeros(T)

    blocks = model.blocks()
    state = initial_state(model, values)
    var_path = np.empty(T)
    g_path = np.zeros(T)
    resid_path = np.empty(T)
    x_prev = 0.0
    for t in range(T):
        state, var_out, g, x_t = generic_step(
            NumpyOps, model.config, blocks, state, x_prev, eps[t]
        )
        _check_finite_state(state, var_out, t)
        var_path[t] = var_out
        if g is not None:
            g_path[t] = g
        resid_path[t] = x_t
        x_prev = values[t]
    return var_path, g_path, resid_path


def nll_loss(var_path, returns, g_path=None, floor: float = 1e-8) -> float:
    """Gaussian negative log-likelihood core: sum of ln(var) + (x - g)^2 / var.

    Variances are clamped at ``floor`` so a path touching zero stays finite.
    """
    var = np.maximum(np.asarray(var_path, dtype=float), floor)
    x = np.asarray(getattr(returns, "values", returns), dtype=float)
    if var.shape != x.shape:
        raise ShapeError("variance path and returns must be aligned")
    err = x if g_path is None else x - np.asarray(g_path, dtype=float)
    if err.shape != x.shape:
        raise ShapeError("g path must align with returns")
    return float(np.sum(np.log(var) + err**2 / var))


def forecast_paths(model: SigmaCellModel, returns) -> np.ndarray:
    """Volatility forecasts sqrt(var_t); Monte Carlo averaged when configured.

    Deterministic mode runs a single eps = 0 pass.  With mc_paths = K > 0 the
    stochastic layer is sampled K times with seeds derived from the model seed
    and the per-point volatilities are averaged.
    """
    cfg = model.config
    if cfg.mc_paths > 0 and cfg.stochastic:
        acc = np.zeros(len(np.asarray(getattr(returns, "values", returns), dtype=float)))
        for k in range(cfg.mc_paths):
            rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 1 + k)))
            var_path, _, _ = run_sequence(model, returns, rng)
            acc += np.sqrt(var_path)
        return acc / cfg.mc_paths
    var_path, _, _ = run_sequence(model, returns, None)
    return np.sqrt(var_path)
