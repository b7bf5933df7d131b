"""Gradient-based fitting of the volatility cells.

The full-sequence loss (sum over steps of ln(var) + residual^2 / var) is
recorded once as a tape program with the parameter vector, the return series,
and the per-step noise draws as leaves; each epoch re-evaluates the tape with
fresh noise, backpropagates through the whole sequence, clips the gradient by
global norm, and applies Adam.  Variants with a residual RNN are trained in
two phases realized as alternating epochs: even epochs update the variance
path, odd epochs the residual network, each with its own Adam moments.

The loss surface has a hard cliff where the output relu/floor clamp kills the
gradient while the likelihood explodes, so the loop is stabilized by three
deterministic measures, all derived from the configured seed:

* candidate screening: several Xavier draws are evaluated and the one with
  the lowest initial loss is trained (draws whose variance path starts pinned
  at the floor are effectively untrainable);
* an explosion guard: when the loss jumps past 3x the best seen, parameters
  revert to the best point and the learning rate halves (also halved on a
  fixed schedule so late epochs polish rather than orbit);
* restarts: independently seeded training runs, keeping the model with the
  best selection loss (validation when provided, else training loss).

The residual network's output layer starts at zero instead of a Xavier draw
so the mean predictor begins as the zero function; a random start injects
O(0.5) pseudo-random values into the squared-residual channel and measurably
corrupts the variance path.
"""

from __future__ import annotations

import math
from dataclasses import replace
from math import ceil, prod

import numpy as np

from ..autodiff import Tape, TapeBuilder
from ..errors import InsufficientDataError, NonFiniteError, TrainingDivergedError
from ..nn import AdamState, adam_update, clip_by_global_norm, xavier_uniform
from .config import (
    CellState,
    SigmaCellConfig,
    SigmaCellModel,
    init_params,
    param_blocks,
)
from .dynamics import TapeOps, generic_step

__all__ = ["build_loss_tape", "fit"]

CONVERGENCE_RTOL = 1e-6
CONVERGENCE_PATIENCE = 10
RESIDUAL_BLOCKS = ("w_xh", "w_hh", "b_hr", "w_ho", "b_or")
GUARD_FACTOR = 3.0
LR_FLOOR_RATIO = 1.0 / 64.0
LR_HALVINGS = 6


def build_loss_tape(config: SigmaCellConfig, n_steps: int, score_from: int = 0) -> Tape:
    """Record the sequence loss as a tape program.

    Leaf groups: "x" (returns), "eps" (noise draws, stochastic variants only),
    and "init_var" (warm-start variance).  ``score_from`` restricts the summed
    loss to steps >= score_from while still filtering the full prefix, which
    is how the validation suffix is scored during model selection.
    """
    if not 0 <= score_from < n_steps:
        raise ValueError("score_from must lie in [0, n_steps)")
    tb = TapeBuilder()
    blocks = {}
    for name, shape in param_blocks(config.variant, config.hidden, config.res_hidden):
        flat = tb.param_group(prod(shape))
        if len(shape) == 2:
            blocks[name] = [flat[i * shape[1] : (i + 1) * shape[1]] for i in range(shape[0])]
        else:
            blocks[name] = flat
    xs = tb.leaf_group("x", n_steps)
    eps = tb.leaf_group("eps", n_steps) if config.stochastic else None
    init_var = tb.leaf_group("init_var", 1)[0]

    ops = TapeOps(tb)
    zero = tb.const(0.0)
    h0 = [zero] * config.res_hidden if config.has_residual_rnn else None
    state = CellState([init_var] * config.hidden, h0, init_var)

    total = None
    x_prev = zero
    for t in range(n_steps):
        state, var_out, g, _ = generic_step(
            ops, config, blocks, state, x_prev, eps[t] if eps is not None else 0.0
        )
        if t >= score_from:
            err = xs[t] if g is None else xs[t] - g
            term = tb.log(var_out) + err * err / var_out
            total = term if total is None else total + term
        x_prev = xs[t]
    return tb.finalize(total)


def _phase_indices(config: SigmaCellConfig) -> tuple[np.ndarray, np.ndarray]:
    """Variance-path block vs residual-RNN block index sets."""
    variance, residual = [], []
    offset = 0
    for name, shape in param_blocks(config.variant, config.hidden, config.res_hidden):
        size = prod(shape)
        target = residual if name in RESIDUAL_BLOCKS else variance
        target.extend(range(offset, offset + size))
        offset += size
    return np.array(variance), np.array(residual)


def _draw_init(config: SigmaCellConfig, rng: np.random.Generator) -> np.ndarray:
    params = init_params(config, rng)
    if config.has_residual_rnn:
        # zero the residual output layer: the mean predictor starts at g = 0
        offset = 0
        for name, shape in param_blocks(config.variant, config.hidden, config.res_hidden):
            size = prod(shape)
            if name == "w_ho":
                params[offset : offset + size] = 0.0
            offset += size
    return params


class _Run:
    """One seeded training run over a prepared tape pair."""

    def __init__(self, config: SigmaCellConfig, tape: Tape, sel_tape: Tape | None,
                 n_train: int, lr: float, run_seed):
        self.config = config
        self.tape = tape
        self.sel_tape = sel_tape
        self.n_train = n_train
        self.lr0 = lr
        seq = np.random.SeedSequence(run_seed)
        init_seq, noise_seq = seq.spawn(2)
        self.init_rng = np.random.default_rng(init_seq)
        self.noise_rng = np.random.default_rng(noise_seq)

    def _screened_init(self) -> np.ndarray:
        best_loss, best = math.inf, None
        if self.config.stochastic:
            self.tape.set_input("eps", np.zeros(self.n_train))
        for _ in range(self.config.init_candidates):
            cand = _draw_init(self.config, self.init_rng)
            try:
                loss = self.tape.forward(cand)
            except NonFiniteError:
                continue
            if loss < best_loss:
                best_loss, best = loss, cand
        if best is None:
            raise NonFiniteError("every initialization candidate evaluated non-finite")
        return best

    def _selection(self, params: np.ndarray, train_loss: float) -> float:
        if self.sel_tape is None:
            return train_loss
        return self.sel_tape.forward(params)

    def train(self) -> tuple[float, np.ndarray, dict]:
        config = self.config
        params = self._screened_init()
        two_phase = config.has_residual_rnn
        var_ix, res_ix = _phase_indices(config) if two_phase else (None, None)
        lr = self.lr0
        lr_floor = self.lr0 * LR_FLOOR_RATIO
        halve_every = ceil(config.epochs / LR_HALVINGS)

        def fresh_states(rate):
            if two_phase:
                return [AdamState.init(var_ix.size, lr=rate),
                        AdamState.init(res_ix.size, lr=rate)]
            return [AdamState.init(params.size, lr=rate)]

        states = fresh_states(lr)
        history = {"train": [], "selection": []}
        best_sel, best_params = math.inf, params.copy()
        best_train, best_train_params = math.inf, params.copy()
        prev_loss = None
        flat_epochs = 0

        for epoch in range(config.epochs):
            if epoch > 0 and epoch % halve_every == 0 and lr > lr_floor:
                lr /= 2.0
                states = [replace(s, lr=lr) for s in states]
            if config.stochastic:
                self.tape.set_input("eps", self.noise_rng.standard_normal(self.n_train))
            loss = self.tape.forward(params)
            if loss > GUARD_FACTOR * best_train and lr > lr_floor:
                # stepped over the relu/floor cliff: back up and go slower
                lr /= 2.0
                params = best_train_params.copy()
                states = fresh_states(lr)
                loss = self.tape.forward(params)
            grads = self.tape.backward()
            sel = self._selection(params, loss)
            history["train"].append(loss)
            history["selection"].append(sel)
            if loss < best_train:
                best_train, best_train_params = loss, params.copy()
            if sel < best_sel:
                best_sel, best_params = sel, params.copy()

            grads = clip_by_global_norm(grads, config.clip_norm)
            if two_phase:
                phase = epoch % 2
                ix = var_ix if phase == 0 else res_ix
                updated, states[phase] = adam_update(states[phase], params[ix], grads[ix])
                params = params.copy()
                params[ix] = updated
            else:
                params, states[0] = adam_update(states[0], params, grads)

            if prev_loss is not None:
                denom = max(abs(prev_loss), 1e-12)
                flat_epochs = flat_epochs + 1 \
                    if abs(loss - prev_loss) / denom < CONVERGENCE_RTOL else 0
                if flat_epochs >= CONVERGENCE_PATIENCE:
                    break
            prev_loss = loss

        # the post-update parameters of the final epoch also compete
        try:
            if config.stochastic:
                self.tape.set_input("eps", np.zeros(self.n_train))
            sel = self._selection(params, self.tape.forward(params))
            if sel < best_sel:
                best_sel, best_params = sel, params.copy()
        except NonFiniteError:
            pass
        return best_sel, best_params, history


def fit(config: SigmaCellConfig, train, valid=None) -> tuple[SigmaCellModel, dict]:
    """Fit one cell, returning the restart with the best selection loss.

    Selection is the validation loss when a validation series is given (a
    deterministic eps = 0 pass over train + valid scored on the suffix), else
    the training loss.  Runs that evaluate non-finite mid-training retry once
    at half the learning rate; if every restart diverges twice, raises
    TrainingDivergedError.
    """
    train_vals = np.asarray(getattr(train, "values", train), dtype=float)
    valid_vals = np.asarray(getattr(valid, "values", valid), dtype=float) if valid is not None \
        else np.empty(0)
    if train_vals.size < 30:
        raise InsufficientDataError("need at least 30 training observations")

    n_train = train_vals.size
    n_valid = valid_vals.size
    floor = config.variance_floor
    train_var = max(float(np.var(train_vals, ddof=1)), floor)

    tape = build_loss_tape(config, n_train)
    tape.set_input("x", train_vals)
    tape.set_input("init_var", [train_var])

    sel_tape = None
    if n_valid > 0:
        full = np.concatenate([train_vals, valid_vals])
        sel_tape = build_loss_tape(config, n_train + n_valid, score_from=n_train)
        sel_tape.set_input("x", full)
        sel_tape.set_input("init_var", [max(float(np.var(full, ddof=1)), floor)])
        if config.stochastic:
            sel_tape.set_input("eps", np.zeros(n_train + n_valid))

    best = None  # (selection loss, params, history, run index, lr used)
    diverged_runs = 0
    for r in range(config.restarts):
        lr = config.lr
        for attempt in range(2):
            run = _Run(config, tape, sel_tape, n_train, lr, (config.seed, r, attempt))
            try:
                sel, params, history = run.train()
            except NonFiniteError:
                lr /= 2.0
                continue
            if best is None or sel < best[0]:
                best = (sel, params, history, r, lr)
            break
        else:
            diverged_runs += 1
    if best is None:
        raise TrainingDivergedError(
            f"all {config.restarts} restarts diverged despite halving the learning rate"
        )

    sel, params, history, run_index, lr_used = best
    info = {
        "epochs_run": len(history["train"]),
        "restarts": config.restarts,
        "diverged_runs": diverged_runs,
        "selected_run": run_index,
        "learning_rate": lr_used,
        "best_selection_loss": sel,
        "final_train_loss": history["train"][-1] if history["train"] else math.nan,
        "train_variance": train_var,
    }
    return SigmaCellModel(config, params, info), history
