"""On-policy rollout collection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..agentnet import BetaPolicyParams, sample_action
from ..errors import ContractError
from .gae import compute_gae


@dataclass
class RolloutBatch:
    masks: np.ndarray  # (N, 21, H, W) float32
    odometry: np.ndarray  # (N, 5)
    actions: np.ndarray  # (N, 2)
    log_probs: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray
    env_index: np.ndarray

    def __post_init__(self):
        n = len(self.masks)
        for name in ("odometry", "actions", "log_probs", "rewards", "values", "dones", "advantages", "returns", "env_index"):
            if len(getattr(self, name)) != n:
                raise ContractError(f"rollout field {name} has length {len(getattr(self, name))}, expected {n}")
        if not np.all(np.isfinite(self.advantages)):
            raise ContractError("non-finite advantages in rollout batch")

    def __len__(self):
        return len(self.masks)


def collect_rollouts(envs, policy, steps: int, gamma: float, lam: float):
    """Step every environment ``steps`` times with a frozen policy.

    Actions are sampled from each environment's own generator; the forward
    pass is batched across environments. Returns the batch (advantages
    already computed per environment) and the list of finished episodes.
    """
    for env in envs:
        if env.world is None:
            env.reset()
    n = len(envs)
    buf = {k: [[] for _ in range(n)] for k in ("masks", "odo", "act", "logp", "rew", "val", "done")}
    ends = []
    for _ in range(steps):
        masks = np.stack([e.obs[0] for e in envs])
        odo = np.stack([e.obs[1] for e in envs])
        alpha, beta, value = policy.evaluate(masks, odo)
        for i, env in enumerate(envs):
            action, logp = sample_action(BetaPolicyParams(alpha[i], beta[i]), env.action_rng)
            buf["masks"][i].append(masks[i])
            buf["odo"][i].append(odo[i])
            reward, done, end = env.step(action)
            buf["act"][i].append(action)
            buf["logp"][i].append(logp)
            buf["rew"][i].append(reward)
            buf["val"][i].append(value[i])
            buf["done"][i].append(float(done))
            if end is not None:
                ends.append(end)
    _, _, boot = policy.evaluate(np.stack([e.obs[0] for e in envs]), np.stack([e.obs[1] for e in envs]))
    adv, ret = [], []
    for i in range(n):
        a, r = compute_gae(buf["rew"][i], buf["val"][i], buf["done"][i], float(boot[i]), gamma, lam)
        adv.append(a)
        ret.append(r)
    cat = lambda k: np.concatenate([np.asarray(x) for x in buf[k]])
    batch = RolloutBatch(
        masks=np.concatenate([np.stack(x) for x in buf["masks"]]).astype(np.float32),
        odometry=cat("odo"),
        actions=cat("act"),
        log_probs=cat("logp"),
        rewards=cat("rew"),
        values=cat("val"),
        dones=cat("done"),
        advantages=np.concatenate(adv),
        returns=np.concatenate(ret),
        env_index=np.repeat(np.arange(n), steps),
    )
    return batch, ends
