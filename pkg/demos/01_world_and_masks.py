"""A drive through the signalized intersection, seen as bird's-eye masks.

Run: python demos/01_world_and_masks.py [out_dir]
Writes one PGM image per mask channel into out_dir (default ./masks_demo).
"""
# %%
import sys
from types import SimpleNamespace

import numpy as np

from predplan.bevmask import DEFAULT_LAYOUT, export_pgm, render_context, render_future, render_past, stack
from predplan.simworld import EpisodeConfig, World, roaming_policy
from predplan.stgraph import constant_velocity

out_dir = sys.argv[1] if len(sys.argv) > 1 else "masks_demo"

# %% An episode is fully determined by its config; the autopilot drives the ego here.
world = World(EpisodeConfig(seed=7, town="intersection", vehicles=12, pedestrians=8, max_steps=400))
for _ in range(60):
    world.step(roaming_policy(world))
print(f"t = {world.time:.1f} s, ego at ({world.ego.x:.1f}, {world.ego.y:.1f}), speed {world.ego.speed:.1f} m/s")
print(f"route completion {world.completion:.2f}, return so far {world.counters.return_:.2f}")

# %% Context and past channels come straight from the world state.
pose = (world.ego.x, world.ego.y, world.ego.heading)
context = render_context(world.graph, world.route_pts, pose)
past = render_past(world.graph, world.history, pose, world.dt)

# %% Future channels need trajectory forecasts. A constant-velocity guess stands in
# for the learned predictor here (see demo 02 for the real one).
vehicles = [a for a in world.agent_states(include_ego=False) if a.cls == "vehicle"]
preds = []
for a in vehicles:
    v = a.speed * np.array([np.cos(a.heading), np.sin(a.heading)])
    preds.append(SimpleNamespace(positions=constant_velocity(a.xy, v), sigma=np.full(7, 1.0)))
future = render_future(preds, pose)

masks = stack(context, past, future)
print(f"{masks.data.shape[0]} channels of {masks.data.shape[1]}x{masks.data.shape[2]} px")

# %% How much of each channel is lit?
for name, channel in zip(DEFAULT_LAYOUT.channels, masks.data):
    print(f"  {name:26s} {100 * np.mean(channel > 0):5.1f}% of pixels")

paths = export_pgm(masks, out_dir)
print(f"wrote {len(paths)} images to {out_dir}/")
