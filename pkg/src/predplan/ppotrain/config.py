"""PPO hyperparameters."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from ..errors import ConfigError


@dataclass
class PPOConfig:
    clip: float = 0.2
    gamma: float = 0.99
    lam: float = 0.97
    epochs: int = 30
    target_kl: float = 0.01
    lr: float = 3e-5
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    rollout_length: int = 2048  # steps per world per update
    n_envs: int = 4
    minibatch: int = 256
    max_grad_norm: float = 0.5

    def validate(self) -> "PPOConfig":
        if not 0.0 < self.clip < 1.0:
            raise ConfigError(f"clip must lie in (0, 1), got {self.clip}")
        for name in ("gamma", "lam"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ConfigError(f"{name} must lie in (0, 1], got {v}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr < 0:
            raise ConfigError(f"learning rate must be nonnegative, got {self.lr}")
        if self.target_kl <= 0:
            raise ConfigError(f"target KL must be positive, got {self.target_kl}")
        for name in ("rollout_length", "n_envs", "minibatch"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.value_coef < 0 or self.entropy_coef < 0 or self.max_grad_norm <= 0:
            raise ConfigError("value/entropy coefficients must be >= 0 and max_grad_norm > 0")
        return self

    def to_dict(self) -> dict:
        return asdict(self)
