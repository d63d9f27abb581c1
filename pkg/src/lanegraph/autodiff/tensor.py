"""Dense float64 tensors with tape-free reverse-mode differentiation.

Each op builds a node holding its parents and a closure that pushes the
output gradient back to them. ``Tensor.backward`` walks the graph in reverse
topological order. Inside ``no_grad()`` no graph is recorded at all.
"""
from __future__ import annotations

import contextlib
import threading

import numpy as np

from lanegraph import kernels
from lanegraph.errors import ShapeError

_state = threading.local()


def grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextlib.contextmanager
def no_grad():
    prev = grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def numpy(self):
        return self.data

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ShapeError(f"backward() needs an explicit grad for shape {self.shape}")
            grad = np.ones_like(self.data)
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return slice_(self, idx)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward):
    parents = tuple(parents)
    if grad_enabled() and any(p.requires_grad for p in parents):
        return Tensor(data, True, parents, backward)
    return Tensor(data)


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a, b, op):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    return _make(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")
    return _make(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    return _make(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def matmul(a, b) -> Tensor:
    """``a[..., k] @ b[k, m]``; leading dims of ``a`` are batch dims."""
    a, b = as_tensor(a), as_tensor(b)
    if b.ndim != 2 or a.ndim < 1 or a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def backward(g):
        ga = g @ b.data.T
        gb = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, b.shape[1])
        return ga, gb

    return _make(a.data @ b.data, (a, b), backward)


def concat(tensors, axis=-1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    ref = tensors[0].shape
    ax = axis % len(ref)
    for t in tensors[1:]:
        if t.ndim != len(ref) or t.shape[:ax] + t.shape[ax + 1:] != ref[:ax] + ref[ax + 1:]:
            raise ShapeError(f"concat: incompatible shapes {ref} and {t.shape}")
    bounds = np.cumsum([0] + [t.shape[ax] for t in tensors])

    def backward(g):
        return tuple(
            np.take(g, np.arange(lo, hi), axis=ax) for lo, hi in zip(bounds[:-1], bounds[1:])
        )

    return _make(np.concatenate([t.data for t in tensors], axis=ax), tensors, backward)


def slice_(a, idx) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        out = np.zeros_like(a.data)
        out[idx] = g
        return (out,)

    return _make(a.data[idx], (a,), backward)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def sum(a, axis=None, keepdims=False) -> Tensor:  # noqa: A001
    a = as_tensor(a)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)


def mean(a, axis=None) -> Tensor:
    a = as_tensor(a)
    n = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return mul(sum(a, axis=axis), 1.0 / n)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    # split by sign so exp never overflows
    x = a.data
    e = np.exp(-np.abs(x))
    y = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _make(y, (a,), lambda g: (g * y * (1.0 - y),))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    y = np.tanh(a.data)
    return _make(y, (a,), lambda g: (g * (1.0 - y * y),))


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return _make(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def exp(a) -> Tensor:
    a = as_tensor(a)
    y = np.exp(a.data)
    return _make(y, (a,), lambda g: (g * y,))


def log(a) -> Tensor:
    a = as_tensor(a)
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,))


def huber(a, delta=1.0) -> Tensor:
    """Elementwise smooth-L1: 0.5 x^2 inside ``|x| < delta``, linear outside."""
    a = as_tensor(a)
    x = a.data
    ax = np.abs(x)
    inside = ax < delta
    y = np.where(inside, 0.5 * x * x, delta * (ax - 0.5 * delta))
    return _make(y, (a,), lambda g: (g * np.where(inside, x, delta * np.sign(x)),))


def layer_norm(a, gamma, beta, eps=1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    a, gamma, beta = as_tensor(a), as_tensor(gamma), as_tensor(beta)
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    n = x.shape[-1]

    def backward(g):
        gxhat = g * gamma.data
        gx = inv / n * (
            n * gxhat
            - gxhat.sum(axis=-1, keepdims=True)
            - xhat * (gxhat * xhat).sum(axis=-1, keepdims=True)
        )
        lead = tuple(range(x.ndim - 1))
        return gx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return _make(xhat * gamma.data + beta.data, (a, gamma, beta), backward)


def _flat2(x):
    return x.reshape(x.shape[0], -1)


def gather_rows(a, indices) -> Tensor:
    a = as_tensor(a)
    indices = np.asarray(indices, dtype=np.int64)

    def backward(g):
        out = kernels.scatter_add_rows(_flat2(g), indices, a.shape[0])
        return (out.reshape(a.shape),)

    return _make(a.data[indices], (a,), backward)


def scatter_rows(base, indices, rows) -> Tensor:
    """Copy of ``base`` with ``base[indices] = rows``; indices must be unique."""
    base, rows = as_tensor(base), as_tensor(rows)
    indices = np.asarray(indices, dtype=np.int64)
    if rows.shape[1:] != base.shape[1:] or len(rows) != len(indices):
        raise ShapeError(f"scatter_rows: rows {rows.shape} do not fit base {base.shape}")
    out = base.data.copy()
    out[indices] = rows.data

    def backward(g):
        gb = g.copy()
        gb[indices] = 0.0
        return gb, g[indices]

    return _make(out, (base, rows), backward)


def segment_sum(values, segment_ids, num_segments) -> Tensor:
    """Sum rows of ``values`` sharing a (sorted ascending) segment id."""
    values = as_tensor(values)
    segment_ids = np.asarray(segment_ids, dtype=np.int64)
    if len(segment_ids) != len(values):
        raise ShapeError(f"segment_sum: {len(segment_ids)} ids for values {values.shape}")
    out = kernels.segment_sum(_flat2(values.data), segment_ids, num_segments)
    out = out.reshape((num_segments,) + values.shape[1:])
    return _make(out, (values,), lambda g: (g[segment_ids],))


def segment_softmax(values, segment_ids, num_segments) -> Tensor:
    """Softmax over rows within each contiguous segment, column-wise."""
    values = as_tensor(values)
    segment_ids = np.asarray(segment_ids, dtype=np.int64)
    if len(segment_ids) != len(values):
        raise ShapeError(f"segment_softmax: {len(segment_ids)} ids for values {values.shape}")
    v = _flat2(values.data)
    shift = kernels.segment_max(v, segment_ids, num_segments)
    e = np.exp(v - shift[segment_ids])
    denom = kernels.segment_sum(e, segment_ids, num_segments)
    y = e / denom[segment_ids]

    def backward(g):
        g2 = _flat2(g)
        dot = kernels.segment_sum(g2 * y, segment_ids, num_segments)
        return ((y * (g2 - dot[segment_ids])).reshape(values.shape),)

    return _make(y.reshape(values.shape), (values,), backward)
