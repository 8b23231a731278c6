"""Driving policy network: state encoder, Beta policy and value heads."""

from .beta import (
    BetaPolicyParams,
    Controls,
    Odometry,
    beta_entropy,
    beta_entropy_t,
    beta_log_prob,
    beta_log_prob_t,
    from_controls,
    mean_action,
    sample_action,
    to_controls,
)
from .network import NetConfig, encode_state, forward, init_agent, policy_forward, value_forward

__all__ = [
    "BetaPolicyParams",
    "Controls",
    "Odometry",
    "beta_entropy",
    "beta_entropy_t",
    "beta_log_prob",
    "beta_log_prob_t",
    "from_controls",
    "mean_action",
    "sample_action",
    "to_controls",
    "NetConfig",
    "encode_state",
    "forward",
    "init_agent",
    "policy_forward",
    "value_forward",
]
