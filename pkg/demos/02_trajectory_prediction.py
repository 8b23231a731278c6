"""Training the graph-based trajectory predictor on synthetic interaction scenes.

Run: python demos/02_trajectory_prediction.py [steps]
Default is 400 Adam steps (a few minutes); the acceptance suite uses 3000.
"""
# %%
import sys
import time

import numpy as np

from predplan.stgraph import (
    Predictor,
    PredictorConfig,
    corpus_arrays,
    cv_baseline_mse,
    synthetic_corpus,
    train_predictor,
    validation_mse,
)

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 400

# %% Scenes mix three behaviours: constant velocity, turning arcs, and car-following
# platoons whose followers brake and accelerate behind a leader.
scenes = synthetic_corpus(600, seed=0)
train, _, _ = corpus_arrays(scenes[:500])
val, truth, category = corpus_arrays(scenes[500:])
print(f"{len(train)} training agents, {len(val)} validation agents")

# %% Each agent sees 8 past samples (3.2 s) and predicts 7 future velocities (2.8 s).
model = Predictor(PredictorConfig()).init(np.random.default_rng(0))
t0 = time.time()
rows = train_predictor(model, train, steps, np.random.default_rng(1), val, truth, eval_every=max(steps // 4, 1), log=print)
print(f"trained in {time.time() - t0:.0f} s")

# %% Compare against holding the last observed velocity.
print(f"{'subset':12s} {'model':>8s} {'const-vel':>10s}")
for cat in ("constant", "turning", "following"):
    idx = np.where(category == cat)[0]
    print(f"{cat:12s} {validation_mse(model, val.subset(idx), truth[idx]):8.3f} {cv_baseline_mse(val.subset(idx), truth[idx]):10.3f}")
print(f"{'all':12s} {validation_mse(model, val, truth):8.3f} {cv_baseline_mse(val, truth):10.3f}")

# %% A few individual forecasts: the most likely latent mode, integrated to positions,
# with a spread that grows along the horizon.
positions, sigma, z_star, _ = model.predict_batch(val.subset(np.arange(3)))
for b in range(3):
    miss = np.linalg.norm(positions[b, -1] - truth[b, -1])
    print(f"agent {b} ({category[b]}): mode {z_star[b]}, final error {miss:.2f} m, sigma {sigma[b, -1]:.2f} m")
