"""Tape-engine tests: per-op gradients against central finite differences."""

import math

import numpy as np
import pytest

from sigmaforge.autodiff import Tape, TapeBuilder, evaluate_with_gradients
from sigmaforge.errors import NonFiniteError


def _single_param_tape(build) -> Tape:
    tb = TapeBuilder()
    (x,) = tb.param_group(1)
    return tb.finalize(build(tb, x))


def _fd(tape: Tape, x: float, h: float = 1e-6) -> float:
    return (tape.forward([x + h]) - tape.forward([x - h])) / (2.0 * h)


def test_square_at_3(self=None):
    tape = _single_param_tape(lambda tb, x: x * x)
    loss, grads = evaluate_with_gradients(tape, [3.0])
    assert loss == 9.0
    assert grads[0] == 6.0


def test_adjusted_softplus_value_and_grad():
    tb = TapeBuilder()
    (x,) = tb.param_group(1)
    tape = tb.finalize(tb.adjusted_softplus(x, 1.0))
    loss, grads = evaluate_with_gradients(tape, [2.0])
    assert loss == pytest.approx(2.3121227037823426, abs=1e-14)
    assert grads[0] == pytest.approx(1.4203781206446506, abs=1e-12)


UNARY_OPS = [
    ("sqrt", lambda tb, x: tb.sqrt(x), (0.1, 4.0)),
    ("exp", lambda tb, x: tb.exp(x), (-3.0, 3.0)),
    ("log", lambda tb, x: tb.log(x), (0.1, 5.0)),
    ("tanh", lambda tb, x: tb.tanh(x), (-3.0, 3.0)),
    ("sigmoid", lambda tb, x: tb.sigmoid(x), (-5.0, 5.0)),
    ("relu", lambda tb, x: tb.relu(x), (0.2, 4.0)),  # stay off the kink
    ("asoftplus", lambda tb, x: tb.adjusted_softplus(x, 1.3), (0.2, 4.0)),
    ("neg", lambda tb, x: -x, (-2.0, 2.0)),
    ("square", lambda tb, x: x**2, (-2.0, 2.0)),
    ("addc", lambda tb, x: x + 1.7, (-2.0, 2.0)),
    ("mulc", lambda tb, x: x * -2.5, (-2.0, 2.0)),
    ("maxc", lambda tb, x: tb.max_const(x, 0.05), (0.2, 4.0)),
]


@pytest.mark.parametrize("name,build,domain", UNARY_OPS, ids=[o[0] for o in UNARY_OPS])
def test_unary_ops_match_finite_differences(name, build, domain):
    tape = _single_param_tape(build)
    rng = np.random.default_rng(hash(name) % 2**32)
    for _ in range(100):
        x = float(rng.uniform(*domain))
        _, grads = evaluate_with_gradients(tape, [x])
        fd = _fd(tape, x)
        assert grads[0] == pytest.approx(fd, rel=1e-6, abs=1e-9), f"{name} at {x}"


BINARY_OPS = [
    ("add", lambda a, b: a + b),
    ("sub", lambda a, b: a - b),
    ("mul", lambda a, b: a * b),
    ("div", lambda a, b: a / b),
]


@pytest.mark.parametrize("name,build", BINARY_OPS, ids=[o[0] for o in BINARY_OPS])
def test_binary_ops_match_finite_differences(name, build):
    tb = TapeBuilder()
    a, b = tb.param_group(2)
    tape = tb.finalize(build(a, b))
    rng = np.random.default_rng(hash(name) % 2**32)
    for _ in range(100):
        x = rng.uniform(0.5, 2.0, size=2)  # away from div-by-zero
        _, grads = evaluate_with_gradients(tape, x)
        h = 1e-6
        for i in range(2):
            xp, xm = x.copy(), x.copy()
            xp[i] += h
            xm[i] -= h
            fd = (tape.forward(xp) - tape.forward(xm)) / (2 * h)
            assert grads[i] == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_fan_out_accumulates_gradient():
    tb = TapeBuilder()
    (x,) = tb.param_group(1)
    y = x * x + x * 3.0  # x used twice
    tape = tb.finalize(y)
    _, grads = evaluate_with_gradients(tape, [2.0])
    assert grads[0] == pytest.approx(7.0, abs=1e-12)


def test_leaf_groups_are_rebindable():
    tb = TapeBuilder()
    (w,) = tb.param_group(1)
    (x,) = tb.leaf_group("x", 1)
    tape = tb.finalize(w * x)
    tape.set_input("x", [5.0])
    assert tape.forward([2.0]) == 10.0
    tape.set_input("x", [-1.0])
    assert tape.forward([2.0]) == -2.0


def test_nonfinite_forward_names_the_node():
    tb = TapeBuilder()
    (x,) = tb.param_group(1)
    tape = tb.finalize(tb.log(x))
    with pytest.raises(NonFiniteError) as err:
        tape.forward([-1.0])
    assert err.value.op_name == "log"
    assert err.value.node_index == 1


def test_reused_tape_matches_fresh_evaluation():
    tb = TapeBuilder()
    params = tb.param_group(3)
    expr = params[0] * params[1] + tb.tanh(params[2])
    tape = tb.finalize(expr)
    for seed in range(5):
        x = np.random.default_rng(seed).uniform(-1, 1, 3)
        expected = x[0] * x[1] + math.tanh(x[2])
        assert tape.forward(x) == pytest.approx(expected, abs=1e-15)
