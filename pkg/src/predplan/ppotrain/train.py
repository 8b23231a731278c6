"""Alternating rollout and update phases, with periodic evaluation rounds."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..agentnet import NetConfig
from ..diffcore import AdamState
from ..errors import BudgetExceeded, ConfigError
from ..harness.metrics import episode_result
from ..simworld import EpisodeConfig
from .config import PPOConfig
from .env import DrivingEnv, ObsConfig
from .policy import Policy
from .ppo import update
from .rollout import collect_rollouts

log = logging.getLogger(__name__)

LOG_COLUMNS = [
    "round",
    "env_steps",
    "mean_reward",
    "vehicle_collisions",
    "walker_collisions",
    "layout_collisions",
    "route_deviations",
    "pct_outside_lane",
    "score_composed",
]


@dataclass
class RunConfig:
    episode: EpisodeConfig = field(default_factory=lambda: EpisodeConfig(town="straight"))
    net: NetConfig = field(default_factory=NetConfig)
    obs: ObsConfig = field(default_factory=ObsConfig)
    ppo: PPOConfig = field(default_factory=PPOConfig)
    total_steps: int = 200_000
    eval_rounds: int = 10
    eval_episodes: int = 10
    seed: int = 0

    def updates(self) -> int:
        per = self.ppo.rollout_length * self.ppo.n_envs
        return max(1, -(-self.total_steps // per))

    def validate(self) -> "RunConfig":
        self.episode.validate()
        self.ppo.validate()
        if self.net.raster != self.obs.raster:
            raise ConfigError(f"network raster {self.net.raster} != observation raster {self.obs.raster}")
        if self.total_steps < 1 or self.eval_episodes < 1:
            raise ConfigError("total_steps and eval_episodes must be >= 1")
        if not 0 <= self.eval_rounds <= self.updates():
            raise ConfigError(f"eval_rounds must lie in [0, {self.updates()}] (number of updates), got {self.eval_rounds}")
        return self


def run_episodes(
    driver, template: EpisodeConfig, obs: ObsConfig, predictor, episodes: int, seed: int, parallel: int = 8, multipliers=None
) -> list:
    """Run ``episodes`` evaluation episodes and return their EpisodeResults in episode order.

    ``driver`` is a Policy (mean actions) or a callable ``world -> ActionCommand``.
    Episodes are dealt round-robin to ``parallel`` environments whose
    forward passes are batched; results do not depend on timing.
    """
    n = max(1, min(parallel, episodes))
    quota = [len(range(i, episodes, n)) for i in range(n)]
    envs = [DrivingEnv(template, obs, predictor, seed=seed, index=1000 + i) for i in range(n)]
    results = {}
    done_count = [0] * n
    for env in envs:
        env.reset()
    active = [i for i in range(n) if quota[i] > 0]
    while active:
        if isinstance(driver, Policy):
            masks = np.stack([envs[i].obs[0] for i in active])
            odo = np.stack([envs[i].obs[1] for i in active])
            actions, _, _ = driver.act(masks, odo, rng=None)
        else:
            actions = []
            for i in active:
                cmd = driver(envs[i].world)
                actions.append([cmd.acceleration, cmd.steering])
        still = []
        for i, a in zip(active, actions):
            _, _, end = envs[i].step(a)
            if end is not None:
                results[i + n * done_count[i]] = episode_result(end.world, multipliers)
                done_count[i] += 1
            if done_count[i] < quota[i]:
                still.append(i)
        active = still
    return [results[k] for k in range(episodes)]


def summarize(round_index: int, env_steps: int, results: list) -> dict:
    m = [r.metrics for r in results]
    kinds = [r.termination for r in results]
    return {
        "round": round_index,
        "env_steps": env_steps,
        "mean_reward": float(np.mean([x.episode_return for x in m])),
        "vehicle_collisions": kinds.count("vehicle-collision"),
        "walker_collisions": kinds.count("pedestrian-collision"),
        "layout_collisions": kinds.count("layout-collision"),
        "route_deviations": int(sum(x.route_deviations for x in m)),
        "pct_outside_lane": float(np.mean([x.outside_lane_pct for x in m])),
        "score_composed": float(np.mean([x.driving_score for x in m])),
    }


def write_log(path, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for r in rows:
            w.writerow([r[c] if isinstance(r[c], int) else f"{r[c]:.6f}" for c in LOG_COLUMNS])


@dataclass
class TrainResult:
    policy: Policy
    log_rows: list
    checkpoints: list
    update_stats: list
    episodes: list = field(default_factory=list)  # EpisodeResults of training episodes


def train(run: RunConfig, predictor=None, out_dir=None, time_budget: float | None = None) -> TrainResult:
    """Train a policy; evaluation rounds are spread evenly over the updates.

    With ``time_budget`` (seconds) the run raises BudgetExceeded after the
    first update that ends past the budget.
    """
    run.validate()
    start = time.monotonic()
    if run.obs.use_prediction and predictor is None:
        raise ConfigError("training with prediction channels needs a predictor checkpoint (or disable prediction)")
    pred = predictor if run.obs.use_prediction else None
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    policy = Policy.create(run.net, run.obs, np.random.default_rng([run.seed, 1]))
    opt = AdamState.for_params(policy.params)
    shuffle = np.random.default_rng([run.seed, 3])
    envs = [DrivingEnv(run.episode, run.obs, pred, seed=run.seed, index=i) for i in range(run.ppo.n_envs)]
    U = run.updates()
    rows, ckpts, ustats, train_eps = [], [], [], []
    env_steps = 0
    for u in range(1, U + 1):
        batch, ends = collect_rollouts(envs, policy, run.ppo.rollout_length, run.ppo.gamma, run.ppo.lam)
        env_steps += len(batch)
        train_eps.extend(episode_result(e.world) for e in ends)
        st = update(policy, batch, run.ppo, opt, shuffle)
        ustats.append(st)
        elapsed = time.monotonic() - start
        if time_budget is not None and elapsed > time_budget and u < U:
            total = U * run.ppo.rollout_length * run.ppo.n_envs
            raise BudgetExceeded(f"stopped after {env_steps} of {total} steps ({elapsed:.0f} s)", env_steps, total, elapsed)
        log.info(
            "update %d/%d steps %d episodes %d mean return %.2f epochs %d kl %.4f",
            u, U, env_steps, len(ends),
            float(np.mean([e.world.counters.return_ for e in ends])) if ends else float("nan"),
            st.epochs, st.kl[-1],
        )
        if run.eval_rounds and (u * run.eval_rounds) // U > ((u - 1) * run.eval_rounds) // U:
            k = len(rows) + 1
            recs = run_episodes(policy, run.episode, run.obs, pred, run.eval_episodes, seed=run.seed + 10_000)
            row = summarize(k, env_steps, recs)
            rows.append(row)
            log.info("eval round %d: %s", k, row)
            if out is not None:
                path = out / f"policy_round{k:03d}.ckpt"
                policy.save(path, env_steps)
                ckpts.append(path)
                write_log(out / "train_log.csv", rows)
    if out is not None:
        policy.save(out / "policy.ckpt", env_steps)
        ckpts.append(out / "policy.ckpt")
        write_log(out / "train_log.csv", rows)
    return TrainResult(policy, rows, ckpts, ustats, train_eps)
