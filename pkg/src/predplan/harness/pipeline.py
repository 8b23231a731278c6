"""End-to-end steps behind the command line: predictor training, policy training, evaluation."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..ppotrain import Policy, train
from ..simworld import roaming_policy
from ..stgraph import Predictor, corpus_arrays, cv_baseline_mse, scenes_from_records, synthetic_corpus, train_predictor, write_eval_csv
from ..stgraph.corpus import read_records
from .config import Config, dump_config
from .dataset import FILES, SAMPLE_STRIDE
from .suite import aggregate_columns, run_suite, write_episode_csv, write_table

log = logging.getLogger(__name__)


def load_scenes(data: str, cfg: Config) -> list:
    """Scenes from ``synthetic:N``, a records file, or a directory written by ``collect``."""
    if data.startswith("synthetic:"):
        try:
            n = int(data.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad synthetic corpus size in {data!r}") from None
        if n < 2:
            raise ConfigError("a synthetic corpus needs at least 2 scenes")
        return synthetic_corpus(n, seed=cfg.seed)
    path = Path(data)
    if path.is_dir():
        name = FILES.get(cfg.predictor.agent_class)
        if name is None:
            raise ConfigError(f"no dataset file for agent class {cfg.predictor.agent_class!r}")
        path = path / name
    rows = read_records(path)
    return scenes_from_records(rows, sample_stride=SAMPLE_STRIDE, window_stride=cfg.predictor_training.window_stride)


def run_train_predictor(data: str, cfg: Config, out_dir) -> dict:
    """Train a predictor; writes predictor.ckpt, predictor_eval.csv and the resolved config."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "resolved_config.yaml")
    scenes = load_scenes(data, cfg)
    order = np.random.default_rng([cfg.seed, 5]).permutation(len(scenes))
    n_val = max(1, int(round(cfg.predictor_training.val_fraction * len(scenes))))
    val_idx, train_idx = np.sort(order[:n_val]), np.sort(order[n_val:])
    cls = cfg.predictor.agent_class
    train_b, _, _ = corpus_arrays([scenes[i] for i in train_idx], cls)
    val_b, val_truth, _ = corpus_arrays([scenes[i] for i in val_idx], cls)
    if len(train_b) == 0 or len(val_b) == 0:
        raise ConfigError(f"not enough {cls} tracks in {data!r} for a train/validation split")
    model = Predictor(cfg.predictor).init(np.random.default_rng([cfg.seed, 6]))
    pt = cfg.predictor_training
    rows = train_predictor(
        model, train_b, pt.steps, np.random.default_rng([cfg.seed, 7]), val_b, val_truth, eval_every=pt.eval_every, log=log.info
    )
    model.save(out / "predictor.ckpt")
    write_eval_csv(out / "predictor_eval.csv", rows)
    return {
        "checkpoint": out / "predictor.ckpt",
        "eval_csv": out / "predictor_eval.csv",
        "val_mse": rows[-1].val_mse if rows else float("nan"),
        "cv_mse": cv_baseline_mse(val_b, val_truth),
    }


def load_predictor(path, cfg: Config):
    return None if path is None else Predictor.load(path, cfg.predictor)


def run_train_policy(cfg: Config, predictor_path, out_dir, use_prediction: bool = True):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    run = cfg.run_config(use_prediction)
    run.validate()
    if use_prediction and predictor_path is None:
        raise ConfigError("--predictor is required unless --no-prediction is given")
    dump_config(cfg, out / "resolved_config.yaml")
    predictor = load_predictor(predictor_path, cfg) if use_prediction else None
    return train(run, predictor, out)


def run_eval(cfg: Config, policy_path: str, predictor_path, preset_name: str, out_dir, use_prediction: bool = True) -> dict:
    """Evaluate a policy checkpoint (or ``autopilot``) on a preset; writes episodes.csv and aggregate.csv."""
    preset = cfg.preset(preset_name)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "resolved_config.yaml")
    obs = cfg.run_config(use_prediction).obs
    if policy_path == "autopilot":
        driver, predictor = roaming_policy, None
        obs = cfg.run_config(False).obs
    else:
        driver = Policy.load(policy_path, cfg.network, obs)
        if use_prediction and predictor_path is None:
            raise ConfigError("--predictor is required to evaluate a policy with prediction channels")
        predictor = load_predictor(predictor_path, cfg) if use_prediction else None
    result = run_suite(driver, preset, obs, predictor, cfg.penalties)
    write_episode_csv(out / "episodes.csv", [r.as_record() for r in result.rows])
    write_table(out / "aggregate.csv", [result.aggregate], aggregate_columns())
    return result
