"""Prediction ablation: identical training budgets with and without the prediction channels."""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass

from ..errors import BudgetExceeded
from ..ppotrain import run_episodes, train
from .config import Config

log = logging.getLogger(__name__)


@dataclass
class AblationSeed:
    seed: int
    with_prediction: float  # vehicle collisions per 100 evaluation episodes
    without_prediction: float


def collisions_per_100(results) -> float:
    hits = sum(r.termination == "vehicle-collision" for r in results)
    return 100.0 * hits / len(results)


def run_ablation(
    cfg: Config,
    predictor,
    seeds=(0, 1, 2),
    total_steps: int = 500_000,
    eval_episodes: int = 100,
    preset: str = "intersection",
    time_budget: float | None = None,
) -> list:
    """Train both agents per seed on ``cfg.episode`` and count vehicle collisions on ``preset``.

    A ``time_budget`` (seconds, whole ablation) turns an over-long run into
    BudgetExceeded carrying the projected total duration.
    """
    bench = cfg.preset(preset)
    runs = 2 * len(seeds)
    start = time.monotonic()
    out = []
    for seed in seeds:
        counts = {}
        for use in (True, False):
            run = dataclasses.replace(cfg.run_config(use), seed=int(seed), total_steps=total_steps)
            remaining = None if time_budget is None else time_budget - (time.monotonic() - start)
            try:
                res = train(run, predictor if use else None, time_budget=remaining)
            except BudgetExceeded as e:
                elapsed = time.monotonic() - start
                done = len(counts) + len(out) * 2
                per_run = e.projected_seconds
                raise BudgetExceeded(
                    f"ablation needs about {per_run * runs / 3600:.1f} h for {runs} runs of {e.total_steps} steps; "
                    f"budget {time_budget:.0f} s exhausted after {done} complete runs and {e.done_steps} steps of the next",
                    e.done_steps + done * e.total_steps,
                    runs * e.total_steps,
                    elapsed,
                ) from e
            results = run_episodes(
                res.policy, bench.episode_config(seed), run.obs, predictor if use else None, eval_episodes, seed=int(seed) + 20_000
            )
            counts[use] = collisions_per_100(results)
            log.info("seed %d prediction=%s: %.1f vehicle collisions per 100 episodes", seed, use, counts[use])
        out.append(AblationSeed(int(seed), counts[True], counts[False]))
    return out
