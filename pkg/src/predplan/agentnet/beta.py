"""Beta action distributions on [-1, 1] and the throttle/brake mapping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betaln, digamma

from ..diffcore import tensor as T

LOG2 = float(np.log(2.0))
U_EPS = 1e-6  # keeps log densities finite at the interval ends


@dataclass
class BetaPolicyParams:
    alpha: np.ndarray  # (2,) acceleration, steering
    beta: np.ndarray

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        self.beta = np.asarray(self.beta, dtype=np.float64)


def action_to_unit(action):
    return np.clip((np.asarray(action, dtype=np.float64) + 1.0) / 2.0, U_EPS, 1.0 - U_EPS)


def beta_log_prob(alpha, beta, action) -> np.ndarray:
    """Log density of actions on [-1, 1]; summed over the last axis."""
    u = action_to_unit(action)
    a, b = np.asarray(alpha), np.asarray(beta)
    lp = (a - 1.0) * np.log(u) + (b - 1.0) * np.log1p(-u) - betaln(a, b) - LOG2
    return lp.sum(axis=-1)


def beta_log_prob_t(alpha: T.Tensor, beta: T.Tensor, action) -> T.Tensor:
    """Differentiable counterpart of ``beta_log_prob`` for tensors (B, 2)."""
    u = action_to_unit(action)
    log_u, log_1mu = T.Tensor(np.log(u)), T.Tensor(np.log1p(-u))
    lnB = T.lgamma(alpha) + T.lgamma(beta) - T.lgamma(alpha + beta)
    lp = (alpha - 1.0) * log_u + (beta - 1.0) * log_1mu - lnB - LOG2
    return T.tsum(lp, axis=-1)


def beta_entropy(alpha, beta) -> np.ndarray:
    a, b = np.asarray(alpha), np.asarray(beta)
    h = betaln(a, b) - (a - 1) * digamma(a) - (b - 1) * digamma(b) + (a + b - 2) * digamma(a + b) + LOG2
    return h.sum(axis=-1)


def beta_entropy_t(alpha: T.Tensor, beta: T.Tensor) -> T.Tensor:
    lnB = T.lgamma(alpha) + T.lgamma(beta) - T.lgamma(alpha + beta)
    h = (
        lnB
        - (alpha - 1.0) * T.digamma(alpha)
        - (beta - 1.0) * T.digamma(beta)
        + (alpha + beta - 2.0) * T.digamma(alpha + beta)
        + LOG2
    )
    return T.tsum(h, axis=-1)


def sample_action(p: BetaPolicyParams, rng: np.random.Generator):
    """Draw u ~ Beta per component, map to 2u - 1; returns (action, log-probability)."""
    u = rng.beta(p.alpha, p.beta)
    action = 2.0 * u - 1.0
    return action, float(beta_log_prob(p.alpha, p.beta, action))


def mean_action(p: BetaPolicyParams) -> np.ndarray:
    return 2.0 * p.alpha / (p.alpha + p.beta) - 1.0


@dataclass
class Controls:
    throttle: float
    brake: float
    steer: float


def to_controls(action) -> Controls:
    acc, steer = (float(v) for v in np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0))
    if acc >= 0:
        return Controls(acc, 0.0, steer)
    return Controls(0.0, -acc, steer)


def from_controls(c: Controls) -> np.ndarray:
    """Acceleration a = max(throttle, brake) * sgn(throttle - brake) and steering."""
    return np.array([max(c.throttle, c.brake) * np.sign(c.throttle - c.brake), c.steer])


@dataclass
class Odometry:
    throttle: float
    brake: float
    steer: float
    vx: float
    vy: float

    def as_vector(self) -> np.ndarray:
        v = np.array([self.throttle, self.brake, self.steer, self.vx, self.vy], dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise ValueError(f"odometry must be finite, got {v}")
        return v
