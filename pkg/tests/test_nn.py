"""Tests for the activation, initializer, clipping, and Adam utilities."""

import math

import numpy as np
import pytest

from sigmaforge.errors import InvalidInputError
from sigmaforge.nn import (
    AdamState,
    adam_update,
    adjusted_softplus,
    clip_by_global_norm,
    xavier_uniform,
)


class TestAdjustedSoftplus:
    @pytest.mark.parametrize("beta", [0.5, 1.0, 5.0])
    def test_equals_one_at_one(self, beta):
        assert adjusted_softplus(1.0, beta) == pytest.approx(1.0, abs=1e-12)

    def test_zero_on_nonpositive_inputs(self):
        xs = np.linspace(-50, 0, 1001)
        assert np.all(adjusted_softplus(xs, 1.0) == 0.0)

    def test_hand_value(self):
        assert adjusted_softplus(2.0, 1.0) == pytest.approx(2.3121227037823426, abs=1e-14)

    def test_monotone_on_random_pairs(self):
        rng = np.random.default_rng(0)
        a = rng.uniform(-10, 10, 100_000)
        b = a + rng.uniform(0, 5, 100_000)
        gap = adjusted_softplus(b, 1.0) - adjusted_softplus(a, 1.0)
        assert np.all(gap >= 0)

    def test_continuous_at_zero(self):
        assert abs(adjusted_softplus(1e-9, 1.0)) <= 1e-8
        assert adjusted_softplus(-1e-9, 1.0) == 0.0

    def test_stable_for_large_arguments(self):
        # softplus(700) == 700 to double precision, so AS = (700 - ln2) / C
        big = adjusted_softplus(700.0, 1.0)
        assert np.isfinite(big)
        assert big == pytest.approx((700.0 - math.log(2)) / 0.6201145069582775, rel=1e-12)

    def test_rejects_nonpositive_beta(self):
        with pytest.raises(InvalidInputError):
            adjusted_softplus(1.0, 0.0)


class TestXavier:
    def test_bound_is_definitional(self):
        w = xavier_uniform(1, 10, np.random.default_rng(0))
        assert w.shape == (1, 10)
        assert np.all(np.abs(w) <= math.sqrt(6.0 / 11.0))

    def test_large_sample_mean_near_zero(self):
        w = xavier_uniform(100, 1000, np.random.default_rng(1))
        assert abs(w.mean()) < 0.01

    def test_same_rng_state_same_matrix(self):
        a = xavier_uniform(3, 4, np.random.default_rng(7))
        b = xavier_uniform(3, 4, np.random.default_rng(7))
        assert np.array_equal(a, b)


class TestClip:
    def test_halves_when_norm_two(self):
        g = np.array([2.0, 0.0, 0.0])
        out = clip_by_global_norm(g, 1.0)
        assert np.allclose(out, [1.0, 0.0, 0.0])

    def test_no_op_below_threshold(self):
        g = np.array([0.3, 0.4])
        assert np.array_equal(clip_by_global_norm(g, 1.0), g)

    def test_zero_vector_unchanged(self):
        g = np.zeros(5)
        assert np.array_equal(clip_by_global_norm(g, 1.0), g)

    def test_output_norm_bounded(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            g = rng.standard_normal(rng.integers(1, 40)) * rng.uniform(0, 100)
            out = clip_by_global_norm(g, 1.0)
            assert np.linalg.norm(out) <= 1.0 + 1e-12


class TestAdam:
    def test_first_step_hand_value(self):
        state = AdamState.init(1, lr=0.001)
        params, state = adam_update(state, np.array([0.0]), np.array([1.0]))
        assert params[0] == pytest.approx(-0.000999999995, abs=1e-15)
        assert state.t == 1

    def test_zero_gradient_keeps_params(self):
        state = AdamState.init(3, lr=0.01)
        params, _ = adam_update(state, np.array([1.0, -2.0, 0.5]), np.zeros(3))
        assert np.array_equal(params, [1.0, -2.0, 0.5])

    def test_step_size_bounded_by_lr(self):
        rng = np.random.default_rng(3)
        state = AdamState.init(8, lr=0.01)
        params = rng.standard_normal(8)
        for _ in range(300):
            grads = rng.standard_normal(8) * 10 ** rng.uniform(-3, 3)
            new_params, state = adam_update(state, params, grads)
            assert np.max(np.abs(new_params - params)) <= 0.01 * (1 + 1e-6)
            params = new_params

    def test_descends_on_quadratic(self):
        state = AdamState.init(1, lr=0.05)
        x = np.array([3.0])
        for _ in range(500):
            x, state = adam_update(state, x, 2.0 * x)
        assert abs(x[0]) < 0.05
