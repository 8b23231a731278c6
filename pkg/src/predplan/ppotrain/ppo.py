"""Clipped-surrogate loss and the multi-epoch update with KL early stopping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..agentnet import beta_entropy_t, beta_log_prob_t, forward
from ..diffcore import AdamState, adam_step, backward
from ..diffcore import tensor as T
from .config import PPOConfig
from .gae import normalize_advantages


def clipped_surrogate(ratio, advantages, clip: float) -> np.ndarray:
    """Per-sample min(r A, clip(r, 1 - eps, 1 + eps) A)."""
    ratio = np.asarray(ratio, dtype=np.float64)
    advantages = np.asarray(advantages, dtype=np.float64)
    return np.minimum(ratio * advantages, np.clip(ratio, 1.0 - clip, 1.0 + clip) * advantages)


@dataclass
class LossParts:
    total: T.Tensor
    policy: float
    value: float
    entropy: float
    approx_kl: float
    clip_fraction: float


def ppo_loss(params, net, masks, odometry, actions, old_log_probs, advantages, returns, config: PPOConfig) -> LossParts:
    """-E[min(rA, clip(r)A)] + c1 E[(V - V_targ)^2] - c2 E[H] on one minibatch."""
    alpha, beta, value = forward(params, np.asarray(masks, dtype=np.float64), odometry, net)
    logp = beta_log_prob_t(alpha, beta, actions)
    log_ratio = logp - T.Tensor(old_log_probs)
    ratio = T.exp(log_ratio)
    adv = T.Tensor(advantages)
    surr = T.minimum(ratio * adv, T.clip(ratio, 1.0 - config.clip, 1.0 + config.clip) * adv)
    policy_loss = -T.mean(surr)
    value_loss = T.mean(T.square(value - T.Tensor(returns)))
    entropy = T.mean(beta_entropy_t(alpha, beta))
    total = policy_loss + config.value_coef * value_loss - config.entropy_coef * entropy
    r = ratio.data
    return LossParts(
        total=total,
        policy=float(policy_loss.data),
        value=float(value_loss.data),
        entropy=float(entropy.data),
        approx_kl=float(np.mean(-log_ratio.data)),
        clip_fraction=float(np.mean(np.abs(r - 1.0) > config.clip)),
    )


@dataclass
class UpdateStats:
    epochs: int = 0
    kl: list = field(default_factory=list)
    clip_fraction: list = field(default_factory=list)
    policy_loss: list = field(default_factory=list)
    value_loss: list = field(default_factory=list)
    entropy: list = field(default_factory=list)
    stopped_early: bool = False


def _clip_grad_norm(store, max_norm: float) -> float:
    keys = store.keys()
    norm = float(np.sqrt(sum(float(np.sum(store.grads[k] ** 2)) for k in keys)))
    if norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for k in keys:
            store.grads[k] *= scale
    return norm


def update(policy, batch, config: PPOConfig, opt: AdamState, rng: np.random.Generator, kl_fn=None) -> UpdateStats:
    """Up to ``config.epochs`` passes of shuffled minibatch steps.

    After each epoch the mean KL(old || new) estimate over that epoch's
    minibatches is compared against the target; exceeding it ends the
    update. ``kl_fn(epoch, kl)`` may replace the estimate (used to force
    the stopping rule in tests).
    """
    params, net = policy.params, policy.net
    adv = normalize_advantages(batch.advantages)
    n = len(batch)
    stats = UpdateStats()
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        parts = []
        for start in range(0, n, config.minibatch):
            idx = np.sort(order[start : start + config.minibatch])
            params.zero_grad()
            lp = ppo_loss(
                params,
                net,
                batch.masks[idx],
                batch.odometry[idx],
                batch.actions[idx],
                batch.log_probs[idx],
                adv[idx],
                batch.returns[idx],
                config,
            )
            backward(lp.total)
            _clip_grad_norm(params, config.max_grad_norm)
            adam_step(params, opt, config.lr)
            parts.append((len(idx), lp))
        w = np.array([m for m, _ in parts], dtype=np.float64) / n
        mean = lambda attr: float(sum(wi * getattr(p, attr) for wi, (_, p) in zip(w, parts)))
        kl = mean("approx_kl")
        if kl_fn is not None:
            kl = float(kl_fn(epoch, kl))
        stats.epochs = epoch + 1
        stats.kl.append(kl)
        stats.clip_fraction.append(mean("clip_fraction"))
        stats.policy_loss.append(mean("policy"))
        stats.value_loss.append(mean("value"))
        stats.entropy.append(mean("entropy"))
        if kl > config.target_kl:
            stats.stopped_early = True
            break
    return stats
