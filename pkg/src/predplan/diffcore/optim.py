"""Adam with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError
from .params import ParamStore


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def for_params(cls, store: ParamStore, **kw) -> "AdamState":
        state = cls(**kw)
        for k in store.keys():
            state.m[k] = np.zeros_like(store.params[k])
            state.v[k] = np.zeros_like(store.params[k])
        return state


def adam_step(store: ParamStore, state: AdamState, lr: float) -> None:
    """Apply one Adam update in place using the gradients held by ``store``."""
    if lr < 0:
        raise ValueError(f"learning rate must be nonnegative, got {lr}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for k in store.keys():
        p, g = store.params[k], store.grads[k]
        m, v = state.m.get(k), state.v.get(k)
        if m is None:
            m = state.m[k] = np.zeros_like(p)
            v = state.v[k] = np.zeros_like(p)
        if m.shape != p.shape or g.shape != p.shape:
            raise ShapeError(f"adam_step: {k} parameter {p.shape}, gradient {g.shape}, moment {m.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        if lr == 0.0:
            continue
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
