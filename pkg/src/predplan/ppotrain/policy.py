"""Policy parameters bundled with the configuration they were built for."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..agentnet import BetaPolicyParams, NetConfig, forward, init_agent, mean_action, sample_action
from ..bevmask import DEFAULT_LAYOUT
from ..diffcore import ParamStore, config_digest, load_checkpoint, save_checkpoint
from ..errors import ConfigError
from .env import ObsConfig


def policy_digest(net: NetConfig, obs: ObsConfig, layout=DEFAULT_LAYOUT) -> bytes:
    """Fingerprint of everything a checkpoint's weights depend on.

    The prediction flag is left out: an agent trained without the future
    channels can still be evaluated with them, and vice versa.
    """
    d = {
        "net": {**net.__dict__, "channels": list(net.channels), "kernels": list(net.kernels)},
        "raster": obs.raster,
        "resolution": obs.resolution,
        "layout": layout.to_config(),
    }
    return config_digest(d)


@dataclass
class Policy:
    params: ParamStore
    net: NetConfig = field(default_factory=NetConfig)
    obs: ObsConfig = field(default_factory=ObsConfig)

    @classmethod
    def create(cls, net: NetConfig, obs: ObsConfig, rng: np.random.Generator) -> "Policy":
        if net.raster != obs.raster:
            raise ConfigError(f"network raster {net.raster} != observation raster {obs.raster}")
        return cls(init_agent(net, rng), net, obs)

    @property
    def digest(self) -> bytes:
        return policy_digest(self.net, self.obs)

    def evaluate(self, masks, odometry):
        """(alpha, beta, value) arrays for a batch of observations."""
        a, b, v = forward(self.params, np.asarray(masks, dtype=np.float64), odometry, self.net)
        return a.data, b.data, v.data

    def act(self, masks, odometry, rng: np.random.Generator | None = None):
        """Actions, log-probabilities and values for a batch; ``rng=None`` uses the mean action."""
        alpha, beta, value = self.evaluate(masks, odometry)
        actions, logps = [], []
        for a, b in zip(alpha, beta):
            p = BetaPolicyParams(a, b)
            if rng is None:
                act = mean_action(p)
                actions.append(act)
                logps.append(0.0)
            else:
                act, lp = sample_action(p, rng)
                actions.append(act)
                logps.append(lp)
        return np.array(actions), np.array(logps), value

    def save(self, path, step: int = 0) -> None:
        save_checkpoint(path, self.params, step, self.digest)

    @classmethod
    def load(cls, path, net: NetConfig, obs: ObsConfig) -> "Policy":
        store, header = load_checkpoint(path)
        expected = policy_digest(net, obs)
        if header.digest != expected:
            raise ConfigError(f"{path}: policy checkpoint was built for a different network/raster/channel layout")
        return cls(store, net, obs)
