"""Generalized advantage estimation."""

from __future__ import annotations

import numpy as np

from ..errors import ContractError


def compute_gae(rewards, values, dones, bootstrap: float, gamma: float, lam: float):
    """Advantages and value targets for one world's step sequence.

    ``dones[t]`` marks that step t ended its episode, so neither the value
    nor the advantage of step t + 1 leaks across the boundary.
    ``bootstrap`` is the value estimate of the state after the last step.
    """
    r = np.asarray(rewards, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    d = np.asarray(dones, dtype=np.float64)
    if not (r.shape == v.shape == d.shape) or r.ndim != 1:
        raise ContractError(f"compute_gae: rewards {r.shape}, values {v.shape}, dones {d.shape} must be equal 1-D")
    n = len(r)
    adv = np.zeros(n)
    next_v, next_a = float(bootstrap), 0.0
    for t in range(n - 1, -1, -1):
        keep = 1.0 - d[t]
        delta = r[t] + gamma * next_v * keep - v[t]
        next_a = delta + gamma * lam * keep * next_a
        adv[t] = next_a
        next_v = v[t]
    return adv, adv + v


def normalize_advantages(adv) -> np.ndarray:
    adv = np.asarray(adv, dtype=np.float64)
    if adv.size < 2:
        return adv - adv.mean() if adv.size else adv
    std = adv.std()
    if std < 1e-12:
        return adv - adv.mean()
    return (adv - adv.mean()) / std
