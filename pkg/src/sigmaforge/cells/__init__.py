"""Recurrent volatility cells: five GARCH-style RNN variants with a shared
flat-parameter layout, full-sequence likelihood training, and one-step-ahead
volatility forecasting."""

from .config import (
    VARIANTS,
    CellState,
    SigmaCellConfig,
    SigmaCellModel,
    init_params,
    param_blocks,
    param_count,
)
from .dynamics import cell_step, forecast_paths, initial_state, nll_loss, run_sequence
from .persist import load_model, model_from_dict, model_to_dict, save_model
from .training import build_loss_tape, fit

__all__ = [
    "VARIANTS",
    "CellState",
    "SigmaCellConfig",
    "SigmaCellModel",
    "init_params",
    "param_blocks",
    "param_count",
    "cell_step",
    "initial_state",
    "run_sequence",
    "nll_loss",
    "forecast_paths",
    "fit",
    "build_loss_tape",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
]
