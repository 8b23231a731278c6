"""Dense, convolutional and recurrent blocks over a ParamStore slice."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from .params import ParamStore
from .tensor import Tensor, as_tensor, conv2d_raw, matmul, reshape, sigmoid, tanh


def init_linear(store: ParamStore, n_in: int, n_out: int, rng: np.random.Generator) -> ParamStore:
    bound = 1.0 / np.sqrt(n_in)
    store.add("W", rng.uniform(-bound, bound, size=(n_out, n_in)))
    store.add("b", rng.uniform(-bound, bound, size=n_out))
    return store


def init_conv(store: ParamStore, c_in: int, c_out: int, k: int, rng: np.random.Generator) -> ParamStore:
    bound = 1.0 / np.sqrt(c_in * k * k)
    store.add("W", rng.uniform(-bound, bound, size=(c_out, c_in, k, k)))
    store.add("b", rng.uniform(-bound, bound, size=c_out))
    return store


def init_lstm(store: ParamStore, n_in: int, hidden: int, rng: np.random.Generator) -> ParamStore:
    bound = 1.0 / np.sqrt(hidden)
    store.add("Wx", rng.uniform(-bound, bound, size=(4 * hidden, n_in)))
    store.add("Wh", rng.uniform(-bound, bound, size=(4 * hidden, hidden)))
    store.add("b", rng.uniform(-bound, bound, size=4 * hidden))
    return store


def linear(params: ParamStore, x) -> Tensor:
    """``W x + b`` for a single vector or a (batch, in) matrix."""
    x = as_tensor(x)
    W = params["W"]
    if x.ndim not in (1, 2) or x.shape[-1] != W.shape[1]:
        raise ShapeError(f"linear: input shape {x.shape} incompatible with weight shape {W.shape}")
    single = x.ndim == 1
    x2 = reshape(x, (1, -1)) if single else x
    y = matmul(x2, params.tensor("W").T) + params.tensor("b")
    return reshape(y, (W.shape[0],)) if single else y


def conv2d(params: ParamStore, x, stride: int = 1, pad: int = 0) -> Tensor:
    """Cross-correlation with bias on (C, H, W) or (N, C, H, W) input."""
    x = as_tensor(x)
    single = x.ndim == 3
    if x.ndim not in (3, 4):
        raise ShapeError(f"conv2d: expected (C,H,W) or (N,C,H,W), got {x.shape}")
    x4 = reshape(x, (1,) + x.shape) if single else x
    y = conv2d_raw(x4, params.tensor("W"), params.tensor("b"), stride=stride, pad=pad)
    return reshape(y, y.shape[1:]) if single else y


def conv_output_size(size: int, k: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - k) // stride + 1


def lstm_step(params: ParamStore, h_prev, c_prev, x):
    """One LSTM cell update; gate rows are ordered input, forget, candidate, output."""
    h_prev, c_prev, x = as_tensor(h_prev), as_tensor(c_prev), as_tensor(x)
    Wx, Wh = params["Wx"], params["Wh"]
    hidden = Wh.shape[1]
    if h_prev.shape != c_prev.shape or h_prev.shape[-1] != hidden:
        raise ShapeError(
            f"lstm_step: hidden state shapes {h_prev.shape}/{c_prev.shape} do not match hidden size {hidden}"
        )
    if x.shape[-1] != Wx.shape[1] or x.ndim != h_prev.ndim:
        raise ShapeError(f"lstm_step: input shape {x.shape} incompatible with weight shape {Wx.shape}")
    single = x.ndim == 1
    if single:
        x, h_prev, c_prev = reshape(x, (1, -1)), reshape(h_prev, (1, -1)), reshape(c_prev, (1, -1))
    z = matmul(x, params.tensor("Wx").T) + matmul(h_prev, params.tensor("Wh").T) + params.tensor("b")
    i = sigmoid(z[:, 0:hidden])
    f = sigmoid(z[:, hidden : 2 * hidden])
    g = tanh(z[:, 2 * hidden : 3 * hidden])
    o = sigmoid(z[:, 3 * hidden : 4 * hidden])
    c = f * c_prev + i * g
    h = o * tanh(c)
    if single:
        return reshape(h, (hidden,)), reshape(c, (hidden,))
    return h, c


def run_lstm(params: ParamStore, inputs, hidden: int, h0=None, c0=None):
    """Unroll ``lstm_step`` over ``inputs`` of shape (batch, steps, features).

    Returns the list of hidden states and the final cell state.
    """
    inputs = as_tensor(inputs)
    batch, steps = inputs.shape[0], inputs.shape[1]
    h = h0 if h0 is not None else Tensor(np.zeros((batch, hidden)))
    c = c0 if c0 is not None else Tensor(np.zeros((batch, hidden)))
    hs = []
    for t in range(steps):
        h, c = lstm_step(params, h, c, inputs[:, t, :])
        hs.append(h)
    return hs, c
