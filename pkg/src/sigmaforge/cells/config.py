"""Configuration, parameter layout, and state for the recurrent volatility cells.

One flat parameter vector covers every variant; the variant plus the hidden
sizes fully determine the named blocks and their shapes:

  base / n / rl : w_s(n), w_r(n), b_h(n), w_o(n), b_o(1)
  ntv / rltv    : w_gen(2n), b_gen(2n), b_h(n), w_o(n), b_o(1)
  rl / rltv add : w_xh(m), w_hh(m, m), b_hr(m), w_ho(m), b_or(1)

With scalar input and hidden size 10 the base cell has 4n + 1 = 41 parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod

import numpy as np

from ..errors import InvalidInputError
from ..nn import xavier_uniform

VARIANTS = ("base", "n", "ntv", "rl", "rltv")
_TIME_VARYING = ("ntv", "rltv")
_RESIDUAL_RNN = ("rl", "rltv")
_STOCHASTIC = ("n", "ntv")

__all__ = [
    "VARIANTS",
    "SigmaCellConfig",
    "CellState",
    "SigmaCellModel",
    "param_blocks",
    "param_count",
    "init_params",
]


@dataclass(frozen=True)
class SigmaCellConfig:
    variant: str = "base"
    hidden: int = 10
    res_hidden: int = 10
    beta_act: float = 1.0
    lr: float = 0.03
    epochs: int = 1000
    clip_norm: float = 1.0
    seed: int = 0
    variance_floor: float = 1e-8
    mc_paths: int = 0  # 0 = deterministic inference, K > 0 = Monte Carlo averaging
    restarts: int = 3  # independently seeded runs; best selection loss wins
    init_candidates: int = 20  # Xavier draws screened per run

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidInputError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.hidden < 1 or self.res_hidden < 1:
            raise InvalidInputError("hidden sizes must be >= 1")
        if self.lr <= 0:
            raise InvalidInputError("lr must be positive")
        if self.variance_floor <= 0:
            raise InvalidInputError("variance_floor must be positive")
        if self.beta_act <= 0:
            raise InvalidInputError("beta_act must be positive")
        if self.clip_norm <= 0:
            raise InvalidInputError("clip_norm must be positive")
        if self.mc_paths < 0:
            raise InvalidInputError("mc_paths must be >= 0")
        if self.restarts < 1 or self.init_candidates < 1:
            raise InvalidInputError("restarts and init_candidates must be >= 1")

    @property
    def time_varying(self) -> bool:
        return self.variant in _TIME_VARYING

    @property
    def has_residual_rnn(self) -> bool:
        return self.variant in _RESIDUAL_RNN

    @property
    def stochastic(self) -> bool:
        return self.variant in _STOCHASTIC


@dataclass
class CellState:
    """Recurrent state: hidden variance vector, residual-RNN hidden, last output."""

    sigma_tilde_sq: object  # length-n vector (ndarray, or recorder handles)
    h: object  # length-m vector for rl/rltv, else None
    sigma_sq_prev: object  # scalar, >= variance floor


def param_blocks(variant: str, hidden: int, res_hidden: int) -> list[tuple[str, tuple[int, ...]]]:
    """Ordered (name, shape) pairs for the flat parameter vector."""
    n, m = hidden, res_hidden
    if variant in _TIME_VARYING:
        blocks = [("w_gen", (2 * n,)), ("b_gen", (2 * n,))]
    else:
        blocks = [("w_s", (n,)), ("w_r", (n,))]
    blocks += [("b_h", (n,)), ("w_o", (n,)), ("b_o", (1,))]
    if variant in _RESIDUAL_RNN:
        blocks += [
            ("w_xh", (m,)),
            ("w_hh", (m, m)),
            ("b_hr", (m,)),
            ("w_ho", (m,)),
            ("b_or", (1,)),
        ]
    return blocks


def param_count(config: SigmaCellConfig) -> int:
    """Exact number of trainable parameters for the configured variant."""
    return sum(prod(shape) for _, shape in param_blocks(config.variant, config.hidden,
                                                        config.res_hidden))


def block_slices(config: SigmaCellConfig) -> dict[str, tuple[slice, tuple[int, ...]]]:
    out = {}
    offset = 0
    for name, shape in param_blocks(config.variant, config.hidden, config.res_hidden):
        size = prod(shape)
        out[name] = (slice(offset, offset + size), shape)
        offset += size
    return out


# Fan pairs for Xavier initialization; scalar input and scalar output, so the
# modulation vectors count as 1 x n maps exactly as in the parameter tally.
_FANS = {
    "w_s": lambda n, m: (1, n),
    "w_r": lambda n, m: (1, n),
    "w_gen": lambda n, m: (1, 2 * n),
    "w_o": lambda n, m: (n, 1),
    "w_xh": lambda n, m: (1, m),
    "w_hh": lambda n, m: (m, m),
    "w_ho": lambda n, m: (m, 1),
}


def init_params(config: SigmaCellConfig, rng: np.random.Generator) -> np.ndarray:
    """Xavier-uniform weights, zero biases, drawn in block order."""
    parts = []
    for name, shape in param_blocks(config.variant, config.hidden, config.res_hidden):
        if name in _FANS:
            fan_in, fan_out = _FANS[name](config.hidden, config.res_hidden)
            parts.append(xavier_uniform(fan_in, fan_out, rng).reshape(-1))
        else:
            parts.append(np.zeros(prod(shape)))
    return np.concatenate(parts)


@dataclass(frozen=True)
class SigmaCellModel:
    """A (possibly fitted) cell: configuration plus flat parameter vector."""

    config: SigmaCellConfig
    params: np.ndarray
    training: dict = field(default_factory=dict)

    def __post_init__(self):
        expected = param_count(self.config)
        arr = np.array(self.params, dtype=float)
        if arr.shape != (expected,):
            raise InvalidInputError(
                f"parameter vector has length {arr.shape}, expected ({expected},)"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "params", arr)

    def block(self, name: str) -> np.ndarray:
        sl, shape = block_slices(self.config)[name]
        return self.params[sl].reshape(shape)

    def blocks(self) -> dict[str, np.ndarray]:
        return {name: self.block(name) for name, _ in
                param_blocks(self.config.variant, self.config.hidden, self.config.res_hidden)}
