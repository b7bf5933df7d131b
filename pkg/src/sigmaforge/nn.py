"""Training utilities: the adjusted softplus activation, Xavier initialization,
global-norm gradient clipping, and the Adam optimizer."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .autodiff import softplus_norm_constant
from .errors import InvalidInputError, ShapeError

__all__ = [
    "adjusted_softplus",
    "xavier_uniform",
    "clip_by_global_norm",
    "AdamState",
    "adam_update",
]

_LOG2 = math.log(2.0)


def adjusted_softplus(x, beta: float = 1.0):
    """Softplus shifted to zero at the origin, clamped below, scaled to 1 at x = 1.

    max(0, (softplus(beta*x)/beta - ln2/beta) / C) with C chosen so the value
    at x = 1 is exactly 1.  Evaluates the softplus through
    ln(1+e^z) = max(z, 0) + ln(1+e^-|z|), which is stable for large |beta*x|.
    Accepts scalars or arrays.
    """
    if beta <= 0:
        raise InvalidInputError("beta must be positive")
    z = beta * np.asarray(x, dtype=float)
    sp = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    out = np.maximum(0.0, (sp - _LOG2) / (beta * softplus_norm_constant(beta)))
    return float(out) if out.ndim == 0 else out


def xavier_uniform(fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    """Matrix of iid Uniform(-a, a) entries with a = sqrt(6 / (fan_in + fan_out))."""
    if fan_in < 1 or fan_out < 1:
        raise InvalidInputError("fan_in and fan_out must be >= 1")
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def clip_by_global_norm(grads: np.ndarray, max_norm: float) -> np.ndarray:
    """Scale the whole gradient vector down to ``max_norm`` when it exceeds it."""
    if max_norm <= 0:
        raise InvalidInputError("max_norm must be positive")
    grads = np.asarray(grads, dtype=float)
    norm = float(np.linalg.norm(grads))
    if norm > max_norm:
        return grads * (max_norm / norm)
    return grads.copy()


@dataclass(frozen=True)
class AdamState:
    """First/second moment estimates plus step count for one parameter vector."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, n_params: int, lr: float = 0.001, beta1: float = 0.9, beta2: float = 0.999,
             eps: float = 1e-8) -> "AdamState":
        return cls(m=np.zeros(n_params), v=np.zeros(n_params), t=0, lr=lr, beta1=beta1,
                   beta2=beta2, eps=eps)


def adam_update(state: AdamState, params: np.ndarray, grads: np.ndarray
                ) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam step: params' = params - lr * m_hat / sqrt(v_hat + eps)."""
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ShapeError("params, grads, and moments must share a shape")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads**2
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = params - state.lr * m_hat / np.sqrt(v_hat + state.eps)
    return new_params, replace(state, m=m, v=v, t=t)
