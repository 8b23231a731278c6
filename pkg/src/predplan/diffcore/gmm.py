"""Bivariate Gaussian mixtures over 2-D velocities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from . import tensor as T

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class GMMParams:
    """Mixture weights, means (m/s), log standard deviations and correlations.

    Shapes are (K,), (K, 2), (K, 2) and (K,). ``corr`` is all zeros for
    diagonal covariances.
    """

    weights: np.ndarray
    means: np.ndarray
    log_stds: np.ndarray
    corr: np.ndarray | None = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        k = self.weights.size
        self.means = np.asarray(self.means, dtype=np.float64).reshape(k, 2)
        self.log_stds = np.asarray(self.log_stds, dtype=np.float64).reshape(k, 2)
        if self.corr is None:
            self.corr = np.zeros(k)
        self.corr = np.asarray(self.corr, dtype=np.float64).reshape(k)

    @property
    def n_components(self) -> int:
        return self.weights.size

    @property
    def stds(self) -> np.ndarray:
        return np.exp(self.log_stds)

    def validate(self) -> None:
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ContractError(f"mixture weights must be nonnegative and sum to 1, got {self.weights.sum()!r}")
        if np.any(np.abs(self.corr) >= 1.0) or not np.all(np.isfinite(self.log_stds)):
            raise ContractError("component covariance is not positive definite")

    def covariances(self) -> np.ndarray:
        s = self.stds
        off = self.corr * s[:, 0] * s[:, 1]
        return np.stack(
            [np.stack([s[:, 0] ** 2, off], -1), np.stack([off, s[:, 1] ** 2], -1)], axis=1
        )

    def top_component(self) -> int:
        return int(np.argmax(self.weights))

    def rotated(self, angle: float) -> "GMMParams":
        """Same mixture expressed in a frame rotated by ``angle`` (rad)."""
        c, s = np.cos(angle), np.sin(angle)
        R = np.array([[c, -s], [s, c]])
        means = self.means @ R.T
        cov = np.einsum("ij,kjl,ml->kim", R, self.covariances(), R)
        sx, sy = np.sqrt(cov[:, 0, 0]), np.sqrt(cov[:, 1, 1])
        corr = np.clip(cov[:, 0, 1] / (sx * sy), -1 + 1e-12, 1 - 1e-12)
        return GMMParams(self.weights.copy(), means, np.log(np.stack([sx, sy], -1)), corr)


def mixture_log_prob(log_weights, means, log_stds, corr, v):
    """Differentiable log-density of a batch of mixtures.

    Shapes: ``log_weights`` (..., K) normalized in log space, ``means`` and
    ``log_stds`` (..., K, 2), ``corr`` (..., K) or ``None`` for diagonal
    covariances, ``v`` (..., 2). Returns shape (...).
    """
    v = T.as_tensor(v)
    vd = T.reshape(v, v.shape[:-1] + (1, 2))
    diff = vd - means
    z = diff * T.exp(-1.0 * log_stds)
    zx, zy = z[..., 0], z[..., 1]
    log_norm = -LOG_2PI - log_stds[..., 0] - log_stds[..., 1]
    if corr is None:
        quad = T.square(zx) + T.square(zy)
        comp = log_norm - 0.5 * quad
    else:
        one_m = 1.0 - T.square(corr)
        quad = T.square(zx) + T.square(zy) - 2.0 * corr * zx * zy
        comp = log_norm - 0.5 * T.log(one_m) - 0.5 * T.div(quad, one_m)
    return T.logsumexp(log_weights + comp, axis=-1)


def gmm_logpdf(g: GMMParams, v) -> float:
    """Log density of mixture ``g`` at velocity ``v`` (m/s)."""
    v = np.asarray(v, dtype=np.float64).reshape(2)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"gmm_logpdf: velocity must be finite, got {v!r}")
    with np.errstate(divide="ignore"):
        log_w = np.log(g.weights)
    corr = None if not np.any(g.corr) else T.Tensor(g.corr)
    out = mixture_log_prob(T.Tensor(log_w), T.Tensor(g.means), T.Tensor(g.log_stds), corr, T.Tensor(v))
    return float(out.data)
