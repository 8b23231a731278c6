"""Minimal float64 differentiable-computation core."""

from .checkpoint import CheckpointHeader, config_digest, load_checkpoint, save_checkpoint
from .gmm import GMMParams, gmm_logpdf, mixture_log_prob
from .layers import (
    conv2d,
    conv_output_size,
    init_conv,
    init_linear,
    init_lstm,
    linear,
    lstm_step,
    run_lstm,
)
from .optim import AdamState, adam_step
from .params import ParamStore
from .tensor import Tensor, backward

__all__ = [
    "AdamState",
    "CheckpointHeader",
    "GMMParams",
    "ParamStore",
    "Tensor",
    "adam_step",
    "backward",
    "config_digest",
    "conv2d",
    "conv_output_size",
    "gmm_logpdf",
    "init_conv",
    "init_linear",
    "init_lstm",
    "linear",
    "load_checkpoint",
    "lstm_step",
    "mixture_log_prob",
    "run_lstm",
    "save_checkpoint",
]
