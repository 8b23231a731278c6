"""Trajectory dataset collection by driving the autopilot through a town."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from ..simworld import PEDESTRIAN, VEHICLE, EpisodeConfig, World, roaming_policy
from ..stgraph.corpus import write_records
from .config import CollectConfig

SAMPLE_STRIDE = 4  # simulator steps between records (0.4 s at dt 0.1)
FILES = {VEHICLE: "vehicles.csv", PEDESTRIAN: "pedestrians.csv"}


def episode_records(world: World, episode_id: int, sensor_range: float) -> list:
    """Drive one episode and return (episode, t, id, class, x, y) rows.

    Agents within ``sensor_range`` of the ego are recorded every
    SAMPLE_STRIDE steps; the ego itself is not part of the data.
    """
    rows = []
    while True:
        t = world.step_count
        if t % SAMPLE_STRIDE == 0:
            ex, ey = world.ego.x, world.ego.y
            for a in world.agent_states(include_ego=False):
                if np.hypot(a.x - ex, a.y - ey) <= sensor_range:
                    rows.append((episode_id, t, a.id, a.cls, a.x, a.y))
        if world.done:
            return rows
        world.step(roaming_policy(world))


def collect_dataset(town: str, episodes: int, seed: int, out_dir, collect: CollectConfig | None = None) -> dict:
    """Write one record file per agent class into ``out_dir``; returns {class: path}.

    Files are written under temporary names and renamed on success, so an
    interrupted run leaves no partial dataset behind.
    """
    cfg = collect or CollectConfig()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng([seed, 21])
    tmp = {cls: out / (name + ".tmp") for cls, name in FILES.items()}
    try:
        for p in tmp.values():
            p.write_text("")
        for ep in range(episodes):
            ec = EpisodeConfig(
                seed=int(rng.integers(2**31)),
                town=town,
                town_seed=seed,
                vehicles=cfg.vehicles,
                pedestrians=cfg.pedestrians,
                max_steps=cfg.max_steps,
            )
            rows = episode_records(World(ec), ep, cfg.sensor_range)
            for cls, p in tmp.items():
                write_records(p, [r for r in rows if r[3] == cls], append=True)
        final = {}
        for cls, p in tmp.items():
            final[cls] = out / FILES[cls]
            os.replace(p, final[cls])
        return final
    except OSError:
        for p in tmp.values():
            p.unlink(missing_ok=True)
        raise
