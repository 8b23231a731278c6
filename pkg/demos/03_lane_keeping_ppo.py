"""PPO on the straight road: from random steering to reliable lane keeping.

Run: python demos/03_lane_keeping_ppo.py [total_steps]
The default 20480 steps (20 updates) take roughly 10 minutes on one core.
Checkpoints and the training log land in ./lane_keeping_run.
"""
# %%
import dataclasses
import logging
import sys
from pathlib import Path

from predplan.harness import load_config, run_suite
from predplan.ppotrain import train

logging.basicConfig(level=logging.INFO, format="%(message)s")

cfg = load_config(Path(__file__).resolve().parent.parent / "configs" / "lane-keeping.yaml")
run = cfg.run_config(False)
if len(sys.argv) > 1:
    run = dataclasses.replace(run, total_steps=int(sys.argv[1]))
    run = dataclasses.replace(run, eval_rounds=min(run.eval_rounds, run.updates()))
print(f"raster {run.obs.raster} px at {run.obs.resolution} m/px, lr {run.ppo.lr}, {run.total_steps} steps")

# %% The policy outputs Beta distributions over steering and speed; evaluation
# rounds use the mean action on a fixed set of held-out episodes.
result = train(run, None, "lane_keeping_run")
print(f"{'round':>5s} {'steps':>7s} {'reward':>8s} {'layout hits':>12s} {'score':>7s}")
for row in result.log_rows:
    print(f"{row['round']:5d} {row['env_steps']:7d} {row['mean_reward']:8.2f} {row['layout_collisions']:12d} {row['score_composed']:7.3f}")

# %% Final check on the lane-keeping preset (3 seeds x 50 episodes).
suite = run_suite(result.policy, cfg.preset("lane-keeping"), run.obs)
agg = suite.aggregate
print(f"success {agg['success_mean']:.3f} (std over seeds {agg['success_std']:.3f}), completion {agg['route_completion_mean']:.3f}")
