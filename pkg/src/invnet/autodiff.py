"""Reverse-mode automatic differentiation on an append-only tape.

Tensors wrap float64 numpy arrays. While a Tape is active (context manager),
every op appends a node whose parents precede it; ``backward`` walks the tape
once in reverse, accumulating vector-Jacobian products. Tensors built outside
any tape are plain values (no graph), which doubles as the fast inference
path.
"""

from __future__ import annotations

import numpy as np

from . import backend as K
from .errors import NumericError

_ACTIVE: "Tape | None" = None


class _Node:
    __slots__ = ("op", "parents", "vjp")

    def __init__(self, op, parents, vjp):
        self.op = op
        self.parents = parents
        self.vjp = vjp


class Tape:
    """Append-only op record; node parents always precede the node."""

    __slots__ = ("nodes", "_prev")

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self) -> "Tape":
        global _ACTIVE
        self._prev = _ACTIVE
        _ACTIVE = self
        return self

    def __exit__(self, *exc):
        global _ACTIVE
        _ACTIVE = self._prev
        return False

    def _index_of(self, t: "Tensor") -> int:
        node = t.node
        if node is not None and node[0] is self:
            return node[1]
        idx = len(self.nodes)
        self.nodes.append(_Node("leaf", (), None))
        t.node = (self, idx)
        return idx


class Tensor:
    """float64 value; records onto the active tape when one is open."""

    __slots__ = ("data", "node")

    def __init__(self, data, _node=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.node = _node

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(op: str, parents, out_data, vjp) -> Tensor:
    tape = _ACTIVE
    if tape is None:
        return Tensor(out_data)
    pidx = tuple(tape._index_of(p) for p in parents)
    idx = len(tape.nodes)
    tape.nodes.append(_Node(op, pidx, vjp))
    return Tensor(out_data, _node=(tape, idx))


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, s in enumerate(shape):
        if s == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _check_finite(op: str, out: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(out)):
        raise NumericError(f"non-finite result in op '{op}'")
    return out


# ---------------------------------------------------------------- basic ops


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = a.data + b.data
    ash, bsh = a.data.shape, b.data.shape

    def vjp(g):
        return _unbroadcast(g, ash), _unbroadcast(g, bsh)

    return _record("add", (a, b), out, vjp)


def sub(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = a.data - b.data
    ash, bsh = a.data.shape, b.data.shape

    def vjp(g):
        return _unbroadcast(g, ash), _unbroadcast(-g, bsh)

    return _record("sub", (a, b), out, vjp)


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = a.data * b.data
    ad, bd = a.data, b.data

    def vjp(g):
        return _unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)

    return _record("mul", (a, b), out, vjp)


def div(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = _check_finite("div", a.data / b.data)
    ad, bd = a.data, b.data

    def vjp(g):
        return (
            _unbroadcast(g / bd, ad.shape),
            _unbroadcast(-g * ad / (bd * bd), bd.shape),
        )

    return _record("div", (a, b), out, vjp)


def neg(a) -> Tensor:
    a = _wrap(a)

    def vjp(g):
        return (-g,)

    return _record("neg", (a,), -a.data, vjp)


def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError("matmul supports 2-D operands only")
    out = a.data @ b.data
    ad, bd = a.data, b.data

    def vjp(g):
        return g @ bd.T, ad.T @ g

    return _record("matmul", (a, b), out, vjp)


# ------------------------------------------------------------- reductions


def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = _wrap(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)
    shape = a.data.shape

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape),)

    return _record("sum", (a,), out, vjp)


def tmean(a, axis=None, keepdims=False) -> Tensor:
    a = _wrap(a)
    out = a.data.mean(axis=axis, keepdims=keepdims)
    shape = a.data.shape
    count = a.data.size if axis is None else shape[axis]

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, shape),)

    return _record("mean", (a,), out, vjp)


# ------------------------------------------------------------ elementwise


def exp(a) -> Tensor:
    a = _wrap(a)
    out = _check_finite("exp", np.exp(a.data))

    def vjp(g):
        return (g * out,)

    return _record("exp", (a,), out, vjp)


def log(a) -> Tensor:
    a = _wrap(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a.data)
    _check_finite("log", out)
    ad = a.data

    def vjp(g):
        return (g / ad,)

    return _record("log", (a,), out, vjp)


def sqrt(a) -> Tensor:
    a = _wrap(a)
    out = _check_finite("sqrt", np.sqrt(a.data))

    def vjp(g):
        return (0.5 * g / out,)

    return _record("sqrt", (a,), out, vjp)


def square(a) -> Tensor:
    a = _wrap(a)
    ad = a.data

    def vjp(g):
        return (2.0 * ad * g,)

    return _record("square", (a,), ad * ad, vjp)


def tanh(a) -> Tensor:
    a = _wrap(a)
    out = np.tanh(a.data)

    def vjp(g):
        return (g * (1.0 - out * out),)

    return _record("tanh", (a,), out, vjp)


def sigmoid(a) -> Tensor:
    a = _wrap(a)
    out = K.sigmoid(a.data)

    def vjp(g):
        return (g * out * (1.0 - out),)

    return _record("sigmoid", (a,), out, vjp)


def relu(a) -> Tensor:
    a = _wrap(a)
    ad = a.data

    def vjp(g):
        return (K.relu_vjp(ad, g),)

    return _record("relu", (a,), K.relu(ad), vjp)


def silu(a) -> Tensor:
    a = _wrap(a)
    ad = a.data

    def vjp(g):
        return (K.silu_vjp(ad, g),)

    return _record("silu", (a,), K.silu(ad), vjp)


def maximum_const(a, c: float) -> Tensor:
    a = _wrap(a)
    ad = a.data
    out = np.maximum(ad, c)

    def vjp(g):
        return (np.where(ad > c, g, 0.0),)

    return _record("maximum_const", (a,), out, vjp)


# --------------------------------------------------------- shape plumbing


def concat(tensors, axis: int = -1) -> Tensor:
    ts = [_wrap(t) for t in tensors]
    out = np.concatenate([t.data for t in ts], axis=axis)
    widths = [t.data.shape[axis] for t in ts]
    offsets = np.cumsum([0] + widths)

    def vjp(g):
        return tuple(
            np.take(g, np.arange(offsets[i], offsets[i + 1]), axis=axis)
            for i in range(len(ts))
        )

    return _record("concat", tuple(ts), out, vjp)


def slice_last(a, start: int, stop: int) -> Tensor:
    a = _wrap(a)
    out = a.data[..., start:stop]
    shape = a.data.shape

    def vjp(g):
        full = np.zeros(shape, dtype=np.float64)
        full[..., start:stop] = g
        return (full,)

    return _record("slice_last", (a,), out, vjp)


# ----------------------------------------------------------------- engine


def backward(out: Tensor, params) -> list[np.ndarray]:
    """Gradients of scalar ``out`` w.r.t. each tensor in ``params``.

    One reverse sweep over the tape; accumulators are local to the call, so
    repeated calls never leak state between them.
    """
    if out.node is None:
        raise ValueError("output was not recorded on a tape")
    if out.data.ndim != 0:
        raise ValueError("backward needs a scalar output")
    if not np.isfinite(out.data):
        raise NumericError("non-finite scalar output in backward")
    tape, oidx = out.node
    grads: list = [None] * (oidx + 1)
    grads[oidx] = np.ones((), dtype=np.float64)
    for idx in range(oidx, -1, -1):
        g = grads[idx]
        grads[idx] = None
        if g is None:
            continue
        node = tape.nodes[idx]
        if node.vjp is None:
            grads[idx] = g  # leaf: keep for harvesting below
            continue
        for pidx, contrib in zip(node.parents, node.vjp(g)):
            if contrib is None:
                continue
            acc = grads[pidx]
            grads[pidx] = contrib if acc is None else acc + contrib
    result = []
    for p in params:
        node = p.node
        if node is not None and node[0] is tape and node[1] <= oidx:
            g = grads[node[1]]
            if g is None:
                result.append(np.zeros_like(p.data))
            elif g.shape == p.data.shape:
                result.append(g)
            else:
                result.append(np.broadcast_to(g, p.data.shape).copy())
        else:
            result.append(np.zeros_like(p.data))
    return result


def grad(f, params) -> list[Tensor]:
    """Gradient of the scalar-valued tape function ``f(*params)``."""
    with Tape():
        out = f(*params)
    if not isinstance(out, Tensor):
        raise TypeError("f must return a Tensor")
    return [Tensor(g) for g in backward(out, params)]


def fd_grad(f, params, h: float = 1e-5) -> list[np.ndarray]:
    """Central-difference gradients, the oracle for gradient checks."""
    out = []
    for p in params:
        g = np.zeros_like(p.data)
        flat = p.data.ravel()
        gf = g.ravel()
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            fp = float(f(*params).data)
            flat[i] = old - h
            fm = float(f(*params).data)
            flat[i] = old
            gf[i] = (fp - fm) / (2.0 * h)
        out.append(g)
    return out
