"""Minimal reverse-mode autodiff over dense 2-D float64 arrays, plus Adam.

Every value is a 2-D ``Tensor``.  Operations on tensors that require
gradients record their parents and a local backward rule; ``backward``
orders the recorded graph topologically (the ``Tape``) and accumulates
gradients into the leaves.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import BadParams, DetachedTensor, NotScalar, ShapeMismatch

LOG_EPS = 1e-12


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "op", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        a = np.array(data, dtype=np.float64)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        elif a.ndim == 1:
            a = a.reshape(1, -1)
        elif a.ndim != 2:
            raise ShapeMismatch(f"tensors are 2-D, got ndim={a.ndim}")
        self.data = a
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None
        self.op = "leaf"
        self.name = name

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def is_leaf(self) -> bool:
        return self.op == "leaf"

    def item(self) -> float:
        if self.data.size != 1:
            raise NotScalar(f"item() on shape {self.shape}")
        return float(self.data[0, 0])

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self.op}{flag})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, 1.0 / other)
        return div(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _finite(a: np.ndarray, op: str) -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise FloatingPointError(f"non-finite value produced by {op}")
    return a


def _make(data, parents, backward, op) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = _finite(data, op)
    out.grad = None
    out.op = op
    out.name = None
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    else:
        out.requires_grad = False
        out._parents = ()
        out._backward = None
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    if shape[0] == 1 and g.shape[0] != 1:
        g = g.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] != 1:
        g = g.sum(axis=1, keepdims=True)
    return g


def _broadcast_shape(a, b, op):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeMismatch(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# -- binary ops ---------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(a.data + b.data, (a, b), bw, "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "sub")

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make(a.data - b.data, (a, b), bw, "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "mul")

    def bw(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make(a.data * b.data, (a, b), bw, "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "div")
    out = a.data / b.data

    def bw(g):
        return _unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)

    return _make(out, (a, b), bw, "div")


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")

    def bw(g):
        return g @ b.data.T, a.data.T @ g

    return _make(a.data @ b.data, (a, b), bw, "matmul")


def spmm(m, b) -> Tensor:
    """Constant (dense or scipy.sparse) matrix times tensor; no gradient to ``m``."""
    b = as_tensor(b)
    if m.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"spmm: {m.shape} @ {b.shape}")
    mt = m.T

    def bw(g):
        return (np.asarray(mt @ g),)

    return _make(np.asarray(m @ b.data), (b,), bw, "spmm")


def scale(a, s: float) -> Tensor:
    a = as_tensor(a)
    s = float(s)
    return _make(a.data * s, (a,), lambda g: (g * s,), "scale")


# -- unary ops ----------------------------------------------------------------

def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return _make(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,), "relu")


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def log(a) -> Tensor:
    """Natural log of ``max(a, 1e-12)``; zero gradient below the clamp."""
    a = as_tensor(a)
    live = a.data > LOG_EPS
    clamped = np.where(live, a.data, LOG_EPS)
    return _make(np.log(clamped), (a,), lambda g: (np.where(live, g / clamped, 0.0),), "log")


def exp(a) -> Tensor:
    a = as_tensor(a)
    with np.errstate(over="ignore"):
        out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,), "exp")


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return _make(out, (a,), lambda g: (g / (2.0 * out),), "sqrt")


def row_softmax(a) -> Tensor:
    a = as_tensor(a)
    z = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=1, keepdims=True)

    def bw(g):
        return (out * (g - (g * out).sum(axis=1, keepdims=True)),)

    return _make(out, (a,), bw, "row_softmax")


def row_sum(a) -> Tensor:
    a = as_tensor(a)
    cols = a.shape[1]
    return _make(a.data.sum(axis=1, keepdims=True), (a,),
                 lambda g: (np.repeat(g, cols, axis=1),), "row_sum")


def row_mean(a) -> Tensor:
    a = as_tensor(a)
    cols = a.shape[1]
    return _make(a.data.mean(axis=1, keepdims=True), (a,),
                 lambda g: (np.repeat(g / cols, cols, axis=1),), "row_mean")


def row_slice(a, idx) -> Tensor:
    """Gather rows ``idx`` (repeats allowed)."""
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.int64).reshape(-1)
    if idx.size and (idx.min() < -a.shape[0] or idx.max() >= a.shape[0]):
        raise ShapeMismatch(f"row index out of range for {a.shape}")

    def bw(g):
        out = np.zeros_like(a.data)
        np.add.at(out, idx, g)
        return (out,)

    return _make(a.data[idx], (a,), bw, "row_slice")


def concat_rows(parts: Sequence) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    if not parts:
        raise ShapeMismatch("concat_rows needs at least one tensor")
    cols = {p.shape[1] for p in parts}
    if len(cols) != 1:
        raise ShapeMismatch(f"concat_rows: column counts differ {sorted(cols)}")
    bounds = np.cumsum([0] + [p.shape[0] for p in parts])

    def bw(g):
        return tuple(g[bounds[i]:bounds[i + 1]] for i in range(len(parts)))

    return _make(np.vstack([p.data for p in parts]), parts, bw, "concat_rows")


def dropout(a, p: float, rng=None, training: bool = True) -> Tensor:
    """Inverted dropout; identity when ``p == 0`` or not training."""
    a = as_tensor(a)
    if not 0.0 <= p < 1.0:
        raise BadParams("dropout probability must be in [0, 1)")
    if not training or p == 0.0:
        return a
    rng = np.random.default_rng(rng)
    keep = (rng.random(a.shape) >= p) / (1.0 - p)
    return _make(a.data * keep, (a,), lambda g: (g * keep,), "dropout")


def sum(a) -> Tensor:  # noqa: A001 - mirrors the op catalogue name
    a = as_tensor(a)
    shape = a.shape
    return _make(a.data.sum().reshape(1, 1), (a,),
                 lambda g: (np.full(shape, g[0, 0]),), "sum")


def mean(a) -> Tensor:
    a = as_tensor(a)
    shape = a.shape
    size = a.data.size
    return _make(a.data.mean().reshape(1, 1), (a,),
                 lambda g: (np.full(shape, g[0, 0] / size),), "mean")


_OPS = {
    "matmul": matmul,
    "add": add,
    "sub": sub,
    "mul": mul,
    "div": div,
    "scalar_mul": scale,
    "relu": relu,
    "sigmoid": sigmoid,
    "log": log,
    "exp": exp,
    "sqrt": sqrt,
    "row_softmax": row_softmax,
    "row_mean": row_mean,
    "row_sum": row_sum,
    "row_slice": row_slice,
    "concat_rows": lambda *parts: concat_rows(parts),
    "dropout": dropout,
    "sum": sum,
    "mean": mean,
    "spmm": spmm,
}


def apply(op_kind: str, *operands, **kwargs) -> Tensor:
    try:
        fn = _OPS[op_kind]
    except KeyError:
        raise BadParams(f"unknown op {op_kind!r}") from None
    return fn(*operands, **kwargs)


# -- backward -----------------------------------------------------------------

class Tape:
    """Topologically ordered recorded operations reachable from a loss."""

    def __init__(self, nodes: list[Tensor]):
        self.nodes = nodes

    @classmethod
    def from_loss(cls, loss: Tensor) -> "Tape":
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(loss, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        return cls(order)

    def __len__(self):
        return len(self.nodes)


def backward(loss: Tensor) -> dict[Tensor, Tensor]:
    """Accumulate d(loss)/d(leaf) into ``leaf.grad``; return ``{leaf: grad}``.

    Interior nodes drop their saved closures afterwards, so a graph can be
    differentiated once.
    """
    if loss.data.size != 1:
        raise NotScalar(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise DetachedTensor("loss does not depend on any tensor requiring grad")
    tape = Tape.from_loss(loss)
    if any(not node.is_leaf and node._backward is None for node in tape.nodes):
        raise DetachedTensor("graph already freed by a previous backward")
    grads: dict[int, np.ndarray] = {id(loss): np.ones((1, 1))}
    leaves: dict[Tensor, Tensor] = {}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.is_leaf:
            node.grad = g if node.grad is None else node.grad + g
            leaves[node] = Tensor(node.grad)
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = pg if key not in grads else grads[key] + pg
    for node in tape.nodes:
        if not node.is_leaf:
            node._parents = ()
            node._backward = None
    return leaves


def grad(loss: Tensor, params: Sequence[Tensor]) -> list[np.ndarray]:
    """Gradients of ``loss`` w.r.t. ``params`` (zeros for unreachable ones)."""
    for p in params:
        p.grad = None
    backward(loss)
    return [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params]


# -- Adam ---------------------------------------------------------------------

@dataclass
class AdamState:
    lr: float
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(params: Sequence[Tensor], grads: Sequence[np.ndarray], state: AdamState):
    """Coupled L2 weight decay then bias-corrected Adam; updates ``params`` in place."""
    if len(params) != len(grads):
        raise ShapeMismatch("params and grads differ in length")
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    if len(state.m) != len(params):
        raise ShapeMismatch("Adam state was built for a different parameter list")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for i, (p, g) in enumerate(zip(params, grads)):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != p.data.shape or state.m[i].shape != p.data.shape:
            raise ShapeMismatch(f"gradient {g.shape} vs parameter {p.data.shape}")
        if state.weight_decay:
            g = g + state.weight_decay * p.data
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
        step = state.lr * (state.m[i] / c1) / (np.sqrt(state.v[i] / c2) + state.eps)
        p.data = p.data - step
    return params, state


class Adam:
    """Adam bound to a fixed parameter list."""

    def __init__(self, params: Sequence[Tensor], lr: float, weight_decay: float = 0.0):
        self.params = list(params)
        self.state = AdamState(lr=lr, weight_decay=weight_decay)

    def step(self, loss: Tensor) -> float:
        grads = grad(loss, self.params)
        adam_step(self.params, grads, self.state)
        return loss.item()


# -- finite differences ---------------------------------------------------------

def finite_difference_check(f: Callable[..., Tensor], point, h: float = 1e-5) -> float:
    """Max relative error between ``backward`` and central differences.

    ``f`` takes one tensor per array in ``point`` and returns a scalar
    tensor.  The error is ``max|analytic - numeric| / max(|analytic|_inf,
    |numeric|_inf, 1e-8)``, taken over all inputs.
    """
    arrays = [np.array(point, dtype=np.float64)] if isinstance(point, np.ndarray) else \
        [np.array(p, dtype=np.float64) for p in point]
    arrays = [Tensor(a).data for a in arrays]
    inputs = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    out = f(*inputs)
    if out.requires_grad:
        analytic = grad(out, inputs)
    else:
        analytic = [np.zeros_like(a) for a in arrays]
    worst = 0.0
    for k, base in enumerate(arrays):
        numeric = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            vals = []
            for sign in (1.0, -1.0):
                probe = [a.copy() for a in arrays]
                probe[k][idx] += sign * h
                vals.append(f(*[Tensor(p) for p in probe]).item())
            numeric[idx] = (vals[0] - vals[1]) / (2.0 * h)
        scale_ = max(np.abs(analytic[k]).max(initial=0.0), np.abs(numeric).max(initial=0.0), 1e-8)
        worst = max(worst, float(np.abs(analytic[k] - numeric).max(initial=0.0) / scale_))
    return worst
