"""Central finite-difference checks for analytic gradients."""

from __future__ import annotations

import numpy as np

from .params import ParamStore
from .tensor import backward


def relative_error(analytic, numeric, reference=None) -> float:
    """max |a - n| scaled by the larger of the two gradients' max magnitude.

    Scaling by the tensor-wide magnitude instead of per element keeps
    near-zero entries, where finite differences are noise-dominated, from
    dominating the figure. When only some coordinates were perturbed,
    ``reference`` holds the full analytic gradient so the scale is still
    tensor-wide.
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    ref = analytic if reference is None else np.asarray(reference, dtype=np.float64)
    scale = max(np.max(np.abs(ref), initial=0.0), np.max(np.abs(numeric), initial=0.0), 1e-12)
    return float(np.max(np.abs(analytic - numeric), initial=0.0) / scale)


def check_params(
    loss_fn, store: ParamStore, rng=None, max_coords: int | None = None, h: float = 1e-5, global_scale: bool = False
):
    """Compare backprop gradients against central differences.

    ``loss_fn()`` must rebuild the graph from the current parameter values
    and return a scalar Tensor. With ``max_coords`` set, only that many
    randomly chosen coordinates per parameter are perturbed.

    Errors are scaled per parameter tensor, or by the gradient of the whole
    store with ``global_scale``. The latter suits deep networks where a
    tensor's entire gradient can sit near the finite-difference noise floor.

    Returns ``{name: relative_error}``.
    """
    rng = rng or np.random.default_rng(0)
    store.zero_grad()
    backward(loss_fn())
    results = {}
    everything = np.concatenate([store.grads[n].ravel() for n in store.keys()]) if global_scale else None
    for name in store.keys():
        p = store.params[name]
        analytic = store.grads[name].copy().ravel()
        idx = np.arange(p.size)
        if max_coords is not None and p.size > max_coords:
            idx = rng.choice(p.size, size=max_coords, replace=False)
        flat = p.reshape(-1)
        numeric = np.empty(idx.size)
        for j, i in enumerate(idx):
            orig = flat[i]
            flat[i] = orig + h
            up = float(loss_fn().data)
            flat[i] = orig - h
            down = float(loss_fn().data)
            flat[i] = orig
            numeric[j] = (up - down) / (2 * h)
        results[name] = relative_error(analytic[idx], numeric, analytic if everything is None else everything)
    return results


def check_inputs(loss_fn, x: np.ndarray, h: float = 1e-5, rng=None, max_coords=None):
    """Same check for a plain input array; ``loss_fn(x_tensor)`` builds the loss."""
    from .tensor import Tensor

    rng = rng or np.random.default_rng(0)
    xt = Tensor(x, requires_grad=True)
    backward(loss_fn(xt))
    analytic = xt.grad.ravel() if xt.grad is not None else np.zeros(x.size)
    flat = x.reshape(-1)
    idx = np.arange(x.size)
    if max_coords is not None and x.size > max_coords:
        idx = rng.choice(x.size, size=max_coords, replace=False)
    numeric = np.empty(idx.size)
    for j, i in enumerate(idx):
        orig = flat[i]
        flat[i] = orig + h
        up = float(loss_fn(Tensor(x)).data)
        flat[i] = orig - h
        down = float(loss_fn(Tensor(x)).data)
        flat[i] = orig
        numeric[j] = (up - down) / (2 * h)
    return relative_error(analytic[idx], numeric, analytic)
