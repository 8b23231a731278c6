"""Single-integrator rollout and trajectory error metrics."""

from __future__ import annotations

import warnings

import numpy as np

from ..errors import ContractError
from .history import DELTA, FUTURE


def integrate(x_t, velocities, dt: float = DELTA) -> np.ndarray:
    """Positions x_{k+1} = x_k + v_k * dt starting from ``x_t``.

    Works on a single agent (x_t (2,), velocities (T, 2)) or a batch
    (x_t (B, 2), velocities (B, T, 2)).
    """
    if not dt > 0:
        raise ValueError(f"integration step must be positive, got {dt}")
    x = np.asarray(x_t, dtype=np.float64)
    v = np.asarray(velocities, dtype=np.float64)
    out = np.empty(v.shape)
    cur = x.copy()
    for k in range(v.shape[-2]):
        cur = cur + v[..., k, :] * dt
        out[..., k, :] = cur
    return out


def evaluate_mse(predicted, truth) -> float:
    """Mean squared Euclidean position error over agents and steps (m^2)."""
    pred = np.asarray(predicted, dtype=np.float64)
    gt = np.asarray(truth, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ContractError(f"trajectory shapes differ: {pred.shape} vs {gt.shape}")
    if pred.size == 0:
        warnings.warn("evaluate_mse on an empty agent set; returning 0", RuntimeWarning, stacklevel=2)
        return 0.0
    return float(np.mean(np.sum((pred - gt) ** 2, axis=-1)))


def constant_velocity(last_positions, last_velocities, horizon: int = FUTURE, dt: float = DELTA) -> np.ndarray:
    """Baseline: hold the last observed velocity."""
    v = np.asarray(last_velocities, dtype=np.float64)
    vs = np.repeat(v[..., None, :], horizon, axis=-2)
    return integrate(last_positions, vs, dt)
