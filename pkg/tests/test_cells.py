"""Cell recursion tests: hand traces, counts, consistency, causality, persistence."""

import numpy as np
import pytest

from sigmaforge.autodiff import evaluate_with_gradients
from sigmaforge.cells import (
    CellState,
    SigmaCellConfig,
    SigmaCellModel,
    build_loss_tape,
    cell_step,
    init_params,
    load_model,
    model_from_dict,
    model_to_dict,
    nll_loss,
    param_count,
    run_sequence,
    save_model,
)

ALL_VARIANTS = ("base", "n", "ntv", "rl", "rltv")


def _unit_base_model(n=1) -> SigmaCellModel:
    cfg = SigmaCellConfig(variant="base", hidden=n)
    params = np.concatenate([np.ones(n), np.ones(n), np.zeros(n), np.ones(n), np.zeros(1)])
    return SigmaCellModel(cfg, params)


class TestParamCount:
    def test_paper_total_for_default_base(self):
        assert param_count(SigmaCellConfig(variant="base", hidden=10)) == 41

    def test_base_formula(self):
        assert param_count(SigmaCellConfig(variant="base", hidden=1)) == 5

    def test_residual_variant_block_accounting(self):
        assert param_count(SigmaCellConfig(variant="rl", hidden=10, res_hidden=10)) == 172

    def test_time_varying_counts(self):
        assert param_count(SigmaCellConfig(variant="ntv", hidden=10)) == 61
        assert param_count(SigmaCellConfig(variant="rltv", hidden=10, res_hidden=10)) == 192

    @pytest.mark.parametrize("variant", ALL_VARIANTS)
    def test_init_matches_count(self, variant):
        cfg = SigmaCellConfig(variant=variant, hidden=7, res_hidden=5)
        params = init_params(cfg, np.random.default_rng(0))
        assert params.size == param_count(cfg)


class TestCellStep:
    def test_identity_weights_fixed_point(self):
        model = _unit_base_model()
        state = CellState(np.array([1.0]), None, 1.0)
        state2, var, g = cell_step(model, state, x_prev=0.0)
        assert var == pytest.approx(1.0, abs=1e-15)
        assert g == 0.0

    def test_identity_weights_preactivation_two(self):
        model = _unit_base_model()
        state = CellState(np.array([1.0]), None, 1.0)
        _, var, _ = cell_step(model, state, x_prev=1.0)
        assert var == pytest.approx(2.3121227037823426, abs=1e-12)

    def test_noise_variant_with_zero_eps_equals_base(self):
        cfg_n = SigmaCellConfig(variant="n", hidden=4, seed=3)
        params = init_params(cfg_n, np.random.default_rng(3))
        model_n = SigmaCellModel(cfg_n, params)
        model_b = SigmaCellModel(SigmaCellConfig(variant="base", hidden=4, seed=3), params)
        x = np.random.default_rng(1).standard_normal(50)
        var_n, _, _ = run_sequence(model_n, x, None)
        var_b, _, _ = run_sequence(model_b, x, None)
        assert np.array_equal(var_n, var_b)


class TestRunSequence:
    @pytest.mark.parametrize("variant", ALL_VARIANTS)
    def test_lengths_match_input(self, variant):
        cfg = SigmaCellConfig(variant=variant, hidden=3, res_hidden=3)
        model = SigmaCellModel(cfg, init_params(cfg, np.random.default_rng(0)))
        x = np.random.default_rng(2).standard_normal(40)
        var, g, resid = run_sequence(model, x, np.random.default_rng(5))
        assert var.shape == g.shape == resid.shape == (40,)

    @pytest.mark.parametrize("variant", ALL_VARIANTS)
    def test_replay_equals_manual_fold(self, variant):
        from sigmaforge.cells.dynamics import generic_step, initial_state, NumpyOps

        cfg = SigmaCellConfig(variant=variant, hidden=3, res_hidden=3)
        model = SigmaCellModel(cfg, init_params(cfg, np.random.default_rng(1)))
        x = np.random.default_rng(3).standard_normal(30)
        eps = np.random.default_rng(7).standard_normal(30) if cfg.stochastic else np.zeros(30)
        var, _, _ = run_sequence(model, x,
                                 np.random.default_rng(7) if cfg.stochastic else None)
        state = initial_state(model, x)
        blocks = model.blocks()
        x_prev = 0.0
        for t in range(30):
            state, v, g, _ = generic_step(NumpyOps, cfg, blocks, state, x_prev, eps[t])
            assert abs(v - var[t]) <= 1e-12
            x_prev = x[t]

    @pytest.mark.parametrize("variant", ALL_VARIANTS)
    def test_variance_floor_holds_everywhere(self, variant):
        cfg = SigmaCellConfig(variant=variant, hidden=4, res_hidden=4)
        for seed in range(5):
            model = SigmaCellModel(cfg, init_params(cfg, np.random.default_rng(seed)))
            x = np.random.default_rng(seed + 50).standard_normal(60)
            var, _, _ = run_sequence(model, x, np.random.default_rng(9))
            assert np.all(var >= cfg.variance_floor)

    def test_fixed_seed_reproduces_noise_path(self):
        cfg = SigmaCellConfig(variant="n", hidden=4)
        model = SigmaCellModel(cfg, init_params(cfg, np.random.default_rng(0)))
        x = np.random.default_rng(1).standard_normal(50)
        a, _, _ = run_sequence(model, x, np.random.default_rng(123))
        b, _, _ = run_sequence(model, x, np.random.default_rng(123))
        assert np.array_equal(a, b)

    def test_time_varying_weights_stay_in_unit_interval(self):
        from sigmaforge.cells.dynamics import NumpyOps

        cfg = SigmaCellConfig(variant="ntv", hidden=5)
        model = SigmaCellModel(cfg, init_params(cfg, np.random.default_rng(6)))
        w_gen, b_gen = model.block("w_gen"), model.block("b_gen")
        for x in np.random.default_rng(8).standard_normal(200) * 5:
            w = NumpyOps.vsigmoid(x * w_gen + b_gen)
            assert np.all((w > 0) & (w < 1))


class TestCausalityStrict:
    @pytest.mark.parametrize("variant", ALL_VARIANTS)
    def test_suffix_perturbation_only_affects_later_steps(self, variant):
        # Compare two step-by-step folds from an identical warm start; the
        # model must be responsive (off the variance floor) for the late
        # steps to differ, hence the well-conditioned draw.
        from conftest import wellcond_params
        from sigmaforge.cells.dynamics import generic_step, initial_state, NumpyOps

        cfg = SigmaCellConfig(variant=variant, hidden=3, res_hidden=3)
        model = SigmaCellModel(cfg, wellcond_params(cfg, np.random.default_rng(2)))
        x = np.random.default_rng(4).standard_normal(40)
        x2 = x.copy()
        s = 20
        x2[s] += 1.0

        def fold(xs):
            state = initial_state(model, x)  # same warm start for both
            out = []
            x_prev = 0.0
            for t in range(40):
                state, v, _, _ = generic_step(NumpyOps, cfg, model.blocks(), state, x_prev, 0.0)
                out.append(v)
                x_prev = xs[t]
            return np.array(out)

        va, vb = fold(x), fold(x2)
        assert np.array_equal(va[: s + 1], vb[: s + 1])
        assert not np.allclose(va[s + 1 :], vb[s + 1 :])


class TestNllLoss:
    def test_unit_variance_zero_return(self):
        assert nll_loss([1.0], [0.0], [0.0]) == 0.0

    def test_hand_value(self):
        assert nll_loss([np.e], [1.0], [0.0]) == pytest.approx(1.3678794411714423, abs=1e-14)

    def test_zero_variance_stays_finite(self):
        loss = nll_loss([0.0, 1.0], [0.1, 0.1], None, floor=1e-8)
        assert np.isfinite(loss)

    def test_matches_tape_loss(self):
        for variant in ALL_VARIANTS:
            cfg = SigmaCellConfig(variant=variant, hidden=3, res_hidden=3)
            model = SigmaCellModel(cfg, init_params(cfg, np.random.default_rng(11)))
            x = np.random.default_rng(12).standard_normal(25)
            var, g, _ = run_sequence(model, x, None)
            direct = nll_loss(var, x, g, floor=cfg.variance_floor)
            tape = build_loss_tape(cfg, 25)
            tape.set_input("x", x)
            if cfg.stochastic:
                tape.set_input("eps", np.zeros(25))
            tape.set_input("init_var", [max(np.var(x, ddof=1), cfg.variance_floor)])
            loss, _ = evaluate_with_gradients(tape, model.params)
            assert loss == pytest.approx(direct, rel=1e-12)


class TestPersistence:
    @pytest.mark.parametrize("variant", ALL_VARIANTS)
    def test_round_trip_bit_exact(self, variant, tmp_path):
        cfg = SigmaCellConfig(variant=variant, hidden=6, res_hidden=4, seed=17, lr=0.013)
        model = SigmaCellModel(cfg, init_params(cfg, np.random.default_rng(17)),
                               {"epochs_run": 3, "final_train_loss": 12.5})
        path = tmp_path / "model.json"
        save_model(model, path)
        back = load_model(path)
        assert back.config == model.config
        assert np.array_equal(back.params, model.params)
        assert back.training["epochs_run"] == 3

    def test_dict_round_trip(self):
        cfg = SigmaCellConfig(variant="rltv", hidden=3, res_hidden=3)
        model = SigmaCellModel(cfg, init_params(cfg, np.random.default_rng(2)))
        again = model_from_dict(model_to_dict(model))
        assert np.array_equal(again.params, model.params)
