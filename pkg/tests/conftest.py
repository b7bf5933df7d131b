"""Shared test helpers."""

from math import prod

import numpy as np

from sigmaforge.cells import SigmaCellConfig, param_blocks


def wellcond_params(config: SigmaCellConfig, rng: np.random.Generator) -> np.ndarray:
    """Random parameters that keep every step away from the relu/floor kinks.

    GARCH-style positive weights on the variance path guarantee the softplus
    pre-activation and the output pre-relu stay strictly positive, so central
    finite differences never straddle a non-differentiable point.  Smoothly
    activated blocks (weight generator, residual network) can take any sign.
    """
    parts = []
    for name, shape in param_blocks(config.variant, config.hidden, config.res_hidden):
        size = prod(shape)
        if name in ("w_s", "w_r", "w_o"):
            parts.append(rng.uniform(0.2, 0.8, size))
        elif name in ("b_h", "b_o"):
            parts.append(rng.uniform(0.1, 0.5, size))
        else:
            parts.append(rng.uniform(-0.6, 0.6, size))
    return np.concatenate(parts)
