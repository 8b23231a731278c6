"""PPO training of the driving policy."""

from .config import PPOConfig
from .env import DrivingEnv, ObservationBuilder, ObsConfig, odometry_of
from .gae import compute_gae, normalize_advantages
from .policy import Policy, policy_digest
from .ppo import LossParts, UpdateStats, clipped_surrogate, ppo_loss, update
from .rollout import RolloutBatch, collect_rollouts
from .train import LOG_COLUMNS, RunConfig, TrainResult, run_episodes, summarize, train, write_log

__all__ = [
    "PPOConfig",
    "DrivingEnv",
    "ObservationBuilder",
    "ObsConfig",
    "odometry_of",
    "compute_gae",
    "normalize_advantages",
    "Policy",
    "policy_digest",
    "LossParts",
    "UpdateStats",
    "clipped_surrogate",
    "ppo_loss",
    "update",
    "RolloutBatch",
    "collect_rollouts",
    "LOG_COLUMNS",
    "RunConfig",
    "TrainResult",
    "run_episodes",
    "summarize",
    "train",
    "write_log",
]
