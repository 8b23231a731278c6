"""Predictor training loop with intermittent validation."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .graph import FEATURE_SCALE
from .kinematics import constant_velocity, evaluate_mse
from .model import Batch, Predictor, to_world_velocity


@dataclass
class EvalRow:
    step: int
    train_loss: float
    val_mse: float


def validation_mse(model: Predictor, batch: Batch, truth: np.ndarray, chunk: int = 256) -> float:
    preds = [model.predict_batch(batch.subset(np.arange(s, min(s + chunk, len(batch)))))[0] for s in range(0, len(batch), chunk)]
    return evaluate_mse(np.concatenate(preds), truth) if preds else 0.0


def cv_baseline_mse(batch: Batch, truth: np.ndarray) -> float:
    v_local = batch.node[:, -1:, 2:4] * FEATURE_SCALE[2]
    v_world = to_world_velocity(v_local, batch.theta)[:, 0]
    return evaluate_mse(constant_velocity(batch.origin, v_world), truth)


def train_predictor(
    model: Predictor,
    train: Batch,
    steps: int,
    rng: np.random.Generator,
    val: Batch | None = None,
    val_truth: np.ndarray | None = None,
    eval_every: int = 0,
    log=None,
) -> list:
    """Minibatch Adam on the negative ELBO.

    Returns EvalRow entries: one before training and one every
    ``eval_every`` steps (when a validation set is given).
    """
    bs = model.config.batch_size
    rows = []
    recent = []

    def evaluate(step):
        if val is None or not eval_every:
            return
        mse = validation_mse(model, val, val_truth)
        loss = float(np.mean(recent)) if recent else float("nan")
        rows.append(EvalRow(step, loss, mse))
        if log:
            log(f"step {step:6d}  train loss {loss:9.4f}  val mse {mse:9.4f}")

    evaluate(0)
    order = rng.permutation(len(train))
    cursor = 0
    for k in range(1, steps + 1):
        if cursor + bs > len(order):
            order = rng.permutation(len(train))
            cursor = 0
        idx = np.sort(order[cursor : cursor + bs])
        cursor += bs
        recent.append(model.train_step(train.subset(idx)))
        recent = recent[-50:]
        if eval_every and k % eval_every == 0:
            evaluate(k)
    return rows


def write_eval_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "train_loss", "val_mse"])
        for r in rows:
            w.writerow([r.step, repr(r.train_loss), repr(r.val_mse)])
