"""Scalar-tape reverse-mode automatic differentiation.

A tape is a topologically ordered list of scalar nodes (operation tag, operand
indices, value).  Programs are recorded once through ``TapeBuilder`` /  ``Var``
operator overloading and then re-evaluated many times with fresh leaf values;
the forward and backward sweeps are interpreted by numba-compiled kernels, so
epoch-level cost is linear in tape size with no Python per node.

Construction is single-writer; a finalized ``Tape`` owns its value buffers, so
share one tape per thread (distinct tapes may run concurrently).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .errors import NonFiniteError, ShapeError

__all__ = ["Var", "TapeBuilder", "Tape", "evaluate_with_gradients"]

# Opcodes.  Order is frozen: the compiled kernels dispatch on these values.
(
    OP_CONST,
    OP_LEAF,
    OP_ADD,
    OP_SUB,
    OP_MUL,
    OP_DIV,
    OP_NEG,
    OP_SQUARE,
    OP_SQRT,
    OP_EXP,
    OP_LOG,
    OP_TANH,
    OP_SIGMOID,
    OP_RELU,
    OP_ASOFTPLUS,
    OP_MAXC,
    OP_ADDC,
    OP_MULC,
) = range(18)

OP_NAMES = (
    "const",
    "leaf",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "square",
    "sqrt",
    "exp",
    "log",
    "tanh",
    "sigmoid",
    "relu",
    "adjusted_softplus",
    "max_const",
    "add_const",
    "mul_const",
)

_LOG2 = math.log(2.0)


def softplus_norm_constant(beta: float) -> float:
    """Scale making the shifted softplus equal 1 at x = 1: (softplus(beta) - ln2) / beta."""
    z = float(beta)
    sp = max(z, 0.0) + math.log1p(math.exp(-abs(z)))
    return (sp - _LOG2) / z


@njit(cache=True, nogil=True)
def _forward(ops, lhs, rhs, aux, aux2, values):  # pragma: no cover - compiled
    n = ops.shape[0]
    for i in range(n):
        o = ops[i]
        if o == OP_LEAF:
            v = values[i]
        elif o == OP_CONST:
            v = aux[i]
        elif o == OP_ADD:
            v = values[lhs[i]] + values[rhs[i]]
        elif o == OP_SUB:
            v = values[lhs[i]] - values[rhs[i]]
        elif o == OP_MUL:
            v = values[lhs[i]] * values[rhs[i]]
        elif o == OP_DIV:
            v = values[lhs[i]] / values[rhs[i]]
        elif o == OP_NEG:
            v = -values[lhs[i]]
        elif o == OP_SQUARE:
            x = values[lhs[i]]
            v = x * x
        elif o == OP_SQRT:
            v = math.sqrt(values[lhs[i]])
        elif o == OP_EXP:
            v = math.exp(values[lhs[i]])
        elif o == OP_LOG:
            v = math.log(values[lhs[i]])
        elif o == OP_TANH:
            v = math.tanh(values[lhs[i]])
        elif o == OP_SIGMOID:
            x = values[lhs[i]]
            if x >= 0.0:
                v = 1.0 / (1.0 + math.exp(-x))
            else:
                e = math.exp(x)
                v = e / (1.0 + e)
        elif o == OP_RELU:
            x = values[lhs[i]]
            v = x if x > 0.0 else 0.0
        elif o == OP_ASOFTPLUS:
            x = values[lhs[i]]
            beta = aux[i]
            z = beta * x
            sp = (z if z > 0.0 else 0.0) + math.log1p(math.exp(-abs(z)))
            inner = (sp - _LOG2) / (beta * aux2[i])
            v = inner if inner > 0.0 else 0.0
        elif o == OP_MAXC:
            x = values[lhs[i]]
            c = aux[i]
            v = x if x > c else c
        elif o == OP_ADDC:
            v = values[lhs[i]] + aux[i]
        else:  # OP_MULC
            v = values[lhs[i]] * aux[i]
        values[i] = v
        if not math.isfinite(v):
            return i
    return -1


@njit(cache=True, nogil=True)
def _backward(ops, lhs, rhs, aux, aux2, values, adj):  # pragma: no cover - compiled
    n = ops.shape[0]
    for i in range(n):
        adj[i] = 0.0
    adj[n - 1] = 1.0
    for i in range(n - 1, -1, -1):
        g = adj[i]
        if g == 0.0:
            continue
        o = ops[i]
        if o == OP_LEAF or o == OP_CONST:
            continue
        elif o == OP_ADD:
            adj[lhs[i]] += g
            adj[rhs[i]] += g
        elif o == OP_SUB:
            adj[lhs[i]] += g
            adj[rhs[i]] -= g
        elif o == OP_MUL:
            adj[lhs[i]] += g * values[rhs[i]]
            adj[rhs[i]] += g * values[lhs[i]]
        elif o == OP_DIV:
            b = values[rhs[i]]
            adj[lhs[i]] += g / b
            adj[rhs[i]] -= g * values[i] / b
        elif o == OP_NEG:
            adj[lhs[i]] -= g
        elif o == OP_SQUARE:
            adj[lhs[i]] += 2.0 * values[lhs[i]] * g
        elif o == OP_SQRT:
            adj[lhs[i]] += 0.5 * g / values[i]
        elif o == OP_EXP:
            adj[lhs[i]] += g * values[i]
        elif o == OP_LOG:
            adj[lhs[i]] += g / values[lhs[i]]
        elif o == OP_TANH:
            y = values[i]
            adj[lhs[i]] += g * (1.0 - y * y)
        elif o == OP_SIGMOID:
            y = values[i]
            adj[lhs[i]] += g * y * (1.0 - y)
        elif o == OP_RELU:
            if values[lhs[i]] > 0.0:
                adj[lhs[i]] += g
        elif o == OP_ASOFTPLUS:
            # Derivative sigmoid(beta*x) / C for x > 0; 0 at and below the kink.
            x = values[lhs[i]]
            if x > 0.0:
                z = aux[i] * x
                if z >= 0.0:
                    s = 1.0 / (1.0 + math.exp(-z))
                else:
                    e = math.exp(z)
                    s = e / (1.0 + e)
                adj[lhs[i]] += g * s / aux2[i]
        elif o == OP_MAXC:
            if values[lhs[i]] > aux[i]:
                adj[lhs[i]] += g
        elif o == OP_ADDC:
            adj[lhs[i]] += g
        else:  # OP_MULC
            adj[lhs[i]] += g * aux[i]


class Var:
    """Handle to one tape node; arithmetic records new nodes."""

    __slots__ = ("builder", "idx")

    def __init__(self, builder: "TapeBuilder", idx: int):
        self.builder = builder
        self.idx = idx

    def _emit(self, op, other=None, aux=0.0, aux2=0.0):
        rhs = other.idx if isinstance(other, Var) else -1
        return self.builder._push(op, self.idx, rhs, aux, aux2)

    def __add__(self, other):
        if isinstance(other, Var):
            return self._emit(OP_ADD, other)
        c = float(other)
        return self if c == 0.0 else self._emit(OP_ADDC, aux=c)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Var):
            return self._emit(OP_SUB, other)
        return self._emit(OP_ADDC, aux=-float(other))

    def __rsub__(self, other):
        return self._emit(OP_NEG)._emit(OP_ADDC, aux=float(other))

    def __mul__(self, other):
        if isinstance(other, Var):
            return self._emit(OP_MUL, other)
        return self._emit(OP_MULC, aux=float(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Var):
            return self._emit(OP_DIV, other)
        return self._emit(OP_MULC, aux=1.0 / float(other))

    def __rtruediv__(self, other):
        return self.builder.const(float(other))._emit(OP_DIV, self)

    def __neg__(self):
        return self._emit(OP_NEG)

    def __pow__(self, exponent):
        if exponent == 2:
            return self._emit(OP_SQUARE)
        raise NotImplementedError("only squaring is supported")


class TapeBuilder:
    """Records a scalar program; ``finalize`` freezes it into a ``Tape``."""

    def __init__(self):
        self._ops: list[int] = []
        self._lhs: list[int] = []
        self._rhs: list[int] = []
        self._aux: list[float] = []
        self._aux2: list[float] = []
        self._param_ix: list[int] = []
        self._groups: dict[str, np.ndarray] = {}

    def _push(self, op, lhs=-1, rhs=-1, aux=0.0, aux2=0.0) -> Var:
        idx = len(self._ops)
        self._ops.append(op)
        self._lhs.append(lhs)
        self._rhs.append(rhs)
        self._aux.append(aux)
        self._aux2.append(aux2)
        return Var(self, idx)

    def const(self, value: float) -> Var:
        return self._push(OP_CONST, aux=float(value))

    def param_group(self, count: int) -> list[Var]:
        """Leaves bound to consecutive entries of the parameter vector."""
        out = []
        for _ in range(count):
            v = self._push(OP_LEAF)
            self._param_ix.append(v.idx)
            out.append(v)
        return out

    def leaf_group(self, name: str, count: int) -> list[Var]:
        """Named data leaves, set per evaluation via ``Tape.set_input``."""
        if name in self._groups:
            raise ValueError(f"duplicate leaf group {name!r}")
        out = [self._push(OP_LEAF) for _ in range(count)]
        self._groups[name] = np.array([v.idx for v in out], dtype=np.int64)
        return out

    # Unary function helpers used by the recording backend.
    def sqrt(self, v: Var) -> Var:
        return v._emit(OP_SQRT)

    def exp(self, v: Var) -> Var:
        return v._emit(OP_EXP)

    def log(self, v: Var) -> Var:
        return v._emit(OP_LOG)

    def tanh(self, v: Var) -> Var:
        return v._emit(OP_TANH)

    def sigmoid(self, v: Var) -> Var:
        return v._emit(OP_SIGMOID)

    def relu(self, v: Var) -> Var:
        return v._emit(OP_RELU)

    def adjusted_softplus(self, v: Var, beta: float) -> Var:
        return v._emit(OP_ASOFTPLUS, aux=float(beta), aux2=softplus_norm_constant(beta))

    def max_const(self, v: Var, floor: float) -> Var:
        return v._emit(OP_MAXC, aux=float(floor))

    def finalize(self, output: Var) -> "Tape":
        if output.idx != len(self._ops) - 1:
            raise ValueError("output must be the last recorded node")
        return Tape(
            ops=np.array(self._ops, dtype=np.int32),
            lhs=np.array(self._lhs, dtype=np.int64),
            rhs=np.array(self._rhs, dtype=np.int64),
            aux=np.array(self._aux, dtype=np.float64),
            aux2=np.array(self._aux2, dtype=np.float64),
            param_ix=np.array(self._param_ix, dtype=np.int64),
            groups=dict(self._groups),
        )


class Tape:
    """A frozen scalar program mapping (parameters, data leaves) to one output."""

    def __init__(self, ops, lhs, rhs, aux, aux2, param_ix, groups):
        self.ops = ops
        self.lhs = lhs
        self.rhs = rhs
        self.aux = aux
        self.aux2 = aux2
        self.param_ix = param_ix
        self.groups = groups
        self._values = np.zeros(ops.shape[0])
        self._adjoints = np.zeros(ops.shape[0])

    @property
    def n_nodes(self) -> int:
        return self.ops.shape[0]

    @property
    def n_params(self) -> int:
        return self.param_ix.shape[0]

    def set_input(self, name: str, values) -> None:
        ix = self.groups[name]
        arr = np.asarray(values, dtype=float)
        if arr.shape != ix.shape:
            raise ShapeError(f"leaf group {name!r} expects {ix.shape[0]} values, got {arr.shape}")
        self._values[ix] = arr

    def forward(self, params) -> float:
        arr = np.asarray(params, dtype=float)
        if arr.shape != self.param_ix.shape:
            raise ShapeError(f"expected {self.n_params} parameters, got {arr.shape}")
        self._values[self.param_ix] = arr
        bad = _forward(self.ops, self.lhs, self.rhs, self.aux, self.aux2, self._values)
        if bad >= 0:
            name = OP_NAMES[self.ops[bad]]
            raise NonFiniteError(
                f"non-finite value at node {bad} (op {name})", node_index=int(bad), op_name=name
            )
        return float(self._values[-1])

    def backward(self) -> np.ndarray:
        """Gradient of the output w.r.t. the parameter vector (call after ``forward``)."""
        _backward(self.ops, self.lhs, self.rhs, self.aux, self.aux2, self._values, self._adjoints)
        return self._adjoints[self.param_ix].copy()


def evaluate_with_gradients(tape: Tape, params) -> tuple[float, np.ndarray]:
    """One forward/backward sweep: loss value and exact reverse-mode gradients."""
    loss = tape.forward(params)
    return loss, tape.backward()
