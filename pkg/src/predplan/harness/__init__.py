"""Benchmarks, metrics, dataset collection, configuration and the command line."""

import importlib

from .metrics import DEFAULT_PENALTIES, EpisodeMetrics, EpisodeResult, driving_score, episode_metrics, episode_result, penalty_factor

# the training loop imports metrics from here, so modules that depend on
# ppotrain are loaded on first access instead of at package import
_LAZY = {
    "BenchmarkPreset": "config",
    "BUILTIN_PRESETS": "config",
    "Config": "config",
    "DENSITY_TIERS": "config",
    "load_config": "config",
    "dump_config": "config",
    "config_from_dict": "config",
    "config_to_dict": "config",
    "collect_dataset": "dataset",
    "run_suite": "suite",
    "aggregate_records": "suite",
    "read_episode_csv": "suite",
    "write_episode_csv": "suite",
    "report": "reporting",
    "summarize_records": "reporting",
    "main": "cli",
    "run_ablation": "ablation",
}


def __getattr__(name):
    if name in _LAZY:
        return getattr(importlib.import_module(f".{_LAZY[name]}", __name__), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


__all__ = [
    "DEFAULT_PENALTIES",
    "EpisodeMetrics",
    "EpisodeResult",
    "driving_score",
    "episode_metrics",
    "episode_result",
    "penalty_factor",
    *_LAZY,
]
