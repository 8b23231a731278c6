"""Reverse-mode automatic differentiation over float64 numpy arrays.

Every op builds a new :class:`Tensor` holding its parents and a closure
mapping the output gradient to parent gradients. :func:`backward` orders
the recorded graph topologically and replays it in reverse.

Parameters enter the graph as leaves with a ``sink``: an array owned by a
:class:`~predplan.diffcore.params.ParamStore` into which the leaf's
gradient is accumulated.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import special

from ..errors import ContractError, ShapeError

__all__ = [
    "Tensor",
    "as_tensor",
    "backward",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "matmul",
    "exp",
    "log",
    "tanh",
    "sigmoid",
    "softplus",
    "elu",
    "relu",
    "square",
    "tsum",
    "mean",
    "reshape",
    "concat",
    "getitem",
    "logsumexp",
    "log_softmax",
    "minimum",
    "clip",
    "lgamma",
    "digamma",
    "conv2d_raw",
]


class Tensor:
    __slots__ = ("data", "parents", "backward_fn", "requires_grad", "sink", "grad")

    def __init__(self, data, parents=(), backward_fn=None, requires_grad=False, sink=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad
        self.sink = sink
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def numpy(self):
        return self.data

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    __array_priority__ = 100

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

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    @property
    def T(self):
        return transpose(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward_fn):
    if any(p.requires_grad for p in parents):
        return Tensor(data, parents, backward_fn, requires_grad=True)
    return Tensor(data)


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _topological(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Propagate d(loss)/d(leaf) into every reachable leaf.

    Leaves with a ``sink`` accumulate into it; other leaves that require a
    gradient accumulate into their ``grad`` attribute.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    if not loss.requires_grad:
        return
    order = _topological(loss)
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.backward_fn is None:
            if node.sink is not None:
                node.sink += g
            else:
                node.grad = g if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg


# -- elementwise arithmetic ---------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.data.shape, b.data.shape
    return _make(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.data.shape, b.data.shape
    return _make(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    return _make(
        ad * bd,
        (a, b),
        lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)),
    )


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    out = ad / bd
    return _make(
        out,
        (a, b),
        lambda g: (_unbroadcast(g / bd, ad.shape), _unbroadcast(-g * out / bd, bd.shape)),
    )


def neg(a):
    a = as_tensor(a)
    return _make(-a.data, (a,), lambda g: (-g,))


def square(a):
    a = as_tensor(a)
    ad = a.data
    return _make(ad * ad, (a,), lambda g: (2.0 * g * ad,))


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    if ad.ndim != 2 or bd.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {ad.shape} and {bd.shape}")
    if ad.shape[1] != bd.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {ad.shape} @ {bd.shape}")
    return _make(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g))


def transpose(a):
    a = as_tensor(a)
    return _make(a.data.T, (a,), lambda g: (g.T,))


# -- nonlinearities -----------------------------------------------------------

def exp(a):
    a = as_tensor(a)
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,))


def log(a):
    a = as_tensor(a)
    ad = a.data
    return _make(np.log(ad), (a,), lambda g: (g / ad,))


def tanh(a):
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _make(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a):
    a = as_tensor(a)
    out = special.expit(a.data)
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),))


def softplus(a):
    a = as_tensor(a)
    ad = a.data
    out = np.logaddexp(0.0, ad)
    return _make(out, (a,), lambda g: (g * special.expit(ad),))


def elu(a):
    a = as_tensor(a)
    ad = a.data
    neg_part = np.expm1(np.minimum(ad, 0.0))
    out = np.where(ad > 0, ad, neg_part)
    return _make(out, (a,), lambda g: (g * np.where(ad > 0, 1.0, neg_part + 1.0),))


def relu(a):
    a = as_tensor(a)
    ad = a.data
    return _make(np.maximum(ad, 0.0), (a,), lambda g: (g * (ad > 0),))


def lgamma(a):
    a = as_tensor(a)
    ad = a.data
    return _make(special.gammaln(ad), (a,), lambda g: (g * special.digamma(ad),))


def digamma(a):
    a = as_tensor(a)
    ad = a.data
    return _make(special.digamma(ad), (a,), lambda g: (g * special.polygamma(1, ad),))


def minimum(a, b):
    """Elementwise minimum; ties route the gradient to ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    take_a = ad <= bd
    return _make(
        np.where(take_a, ad, bd),
        (a, b),
        lambda g: (_unbroadcast(g * take_a, ad.shape), _unbroadcast(g * ~take_a, bd.shape)),
    )


def clip(a, lo, hi):
    a = as_tensor(a)
    ad = a.data
    inside = (ad >= lo) & (ad <= hi)
    return _make(np.clip(ad, lo, hi), (a,), lambda g: (g * inside,))


# -- reductions and shape ops -------------------------------------------------

def tsum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    shape = a.data.shape
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def fn(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _make(out, (a,), fn)


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    n = a.data.size if axis is None else np.prod([a.data.shape[i] for i in np.atleast_1d(axis)])
    return tsum(a, axis=axis, keepdims=keepdims) * (1.0 / float(n))


def reshape(a, shape):
    a = as_tensor(a)
    old = a.data.shape
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    return _make(out, tuple(tensors), lambda g: tuple(np.split(g, splits, axis=axis)))


def getitem(a, index):
    a = as_tensor(a)
    shape = a.data.shape
    parts = index if isinstance(index, tuple) else (index,)
    basic = all(isinstance(p, (slice, int, type(Ellipsis))) for p in parts)

    def fn(g):
        full = np.zeros(shape)
        if basic:
            full[index] = g
        else:
            np.add.at(full, index, g)
        return (full,)

    return _make(a.data[index], (a,), fn)


def logsumexp(a, axis=-1, keepdims=False):
    a = as_tensor(a)
    ad = a.data
    out = special.logsumexp(ad, axis=axis, keepdims=True)
    weights = np.exp(ad - out)

    def fn(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (g * weights,)

    return _make(out if keepdims else np.squeeze(out, axis=axis), (a,), fn)


def log_softmax(a, axis=-1):
    a = as_tensor(a)
    ad = a.data
    out = ad - special.logsumexp(ad, axis=axis, keepdims=True)
    probs = np.exp(out)
    return _make(out, (a,), lambda g: (g - probs * g.sum(axis=axis, keepdims=True),))


# -- convolution --------------------------------------------------------------

def conv2d_raw(x, weight, bias, stride=1, pad=0):
    """Batched 2-D cross-correlation, ``x`` (N, C, H, W), ``weight`` (O, C, k, k)."""
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    xd, wd = x.data, weight.data
    n, c, h, w = xd.shape
    o, cw, k, k2 = wd.shape
    if cw != c or k != k2:
        raise ShapeError(f"conv2d weight {wd.shape} does not match input {xd.shape}")
    if stride < 1:
        raise ShapeError(f"conv2d stride must be >= 1, got {stride}")
    hp, wp = h + 2 * pad, w + 2 * pad
    if k > hp or k > wp:
        raise ShapeError(f"conv2d kernel {k}x{k} larger than padded input {hp}x{wp}")
    ho, wo = (hp - k) // stride + 1, (wp - k) // stride + 1
    xp = np.pad(xd, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else xd
    windows = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * k * k)
    wmat = wd.reshape(o, c * k * k)
    out = (cols @ wmat.T).reshape(n, ho, wo, o).transpose(0, 3, 1, 2) + bias.data[None, :, None, None]

    def fn(g):
        g2 = g.transpose(0, 2, 3, 1).reshape(n * ho * wo, o)
        gw = (g2.T @ cols).reshape(wd.shape)
        gb = g2.sum(axis=0)
        if not x.requires_grad:
            return None, gw, gb
        gcols = (g2 @ wmat).reshape(n, ho, wo, c, k, k)
        gxp = np.zeros((n, c, hp, wp))
        for i in range(k):
            for j in range(k):
                gxp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += gcols[
                    :, :, :, :, i, j
                ].transpose(0, 3, 1, 2)
        gx = gxp[:, :, pad : pad + h, pad : pad + w] if pad else gxp
        return gx, gw, gb

    return _make(np.ascontiguousarray(out), (x, weight, bias), fn)
