"""Trajectory corpora: synthetic interaction scenes and simulator dataset files."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ParseError
from .graph import build_scene_graph
from .history import DELTA, FUTURE, PAST, AgentHistory, future_velocities
from .model import Batch, concat_batches, make_batch

WINDOW = PAST + FUTURE
CATEGORIES = ("constant", "turning", "following")


@dataclass
class Scene:
    tracks: dict  # id -> (15, 2) positions sampled every DELTA
    classes: dict  # id -> "vehicle" | "pedestrian"
    category: dict = field(default_factory=dict)  # id -> behavior label


def _constant(rng, origin):
    heading = rng.uniform(-np.pi, np.pi)
    speed = rng.uniform(2.0, 14.0)
    t = np.arange(WINDOW)[:, None] * DELTA
    return origin + t * speed * np.array([np.cos(heading), np.sin(heading)])


def _turning(rng, origin):
    heading = rng.uniform(-np.pi, np.pi)
    speed = rng.uniform(3.0, 10.0)
    yaw = rng.choice([-1.0, 1.0]) * rng.uniform(0.08, 0.35)
    pos = [origin]
    h = heading
    # integrate on a fine grid for a smooth arc
    sub = 10
    p = origin.copy()
    for _ in range(WINDOW - 1):
        for _ in range(sub):
            p = p + speed * DELTA / sub * np.array([np.cos(h), np.sin(h)])
            h += yaw * DELTA / sub
        pos.append(p.copy())
    return np.array(pos)


def _following(rng, origin, n_followers):
    """Leader with a smooth speed profile; followers use intelligent-driver car following."""
    heading = rng.uniform(-np.pi, np.pi)
    u = np.array([np.cos(heading), np.sin(heading)])
    dt = 0.1
    steps = (WINDOW - 1) * 4 + 1
    warm = 40
    v0 = rng.uniform(5.0, 12.0)
    amp = rng.uniform(1.0, 4.0)
    omega = rng.uniform(0.3, 0.9)
    phase = rng.uniform(0, 2 * np.pi)
    brake_at = rng.uniform(0.0, (steps + warm) * dt)
    n = 1 + n_followers
    s = np.zeros(n)
    v = np.full(n, v0)
    gaps = rng.uniform(10.0, 25.0, size=n_followers)
    for k in range(1, n):
        s[k] = s[k - 1] - gaps[k - 1] - 4.5
    desired = v0 * rng.uniform(1.05, 1.3, size=n)
    out = []
    for step in range(steps + warm):
        t = step * dt
        target = v0 + amp * np.sin(omega * t + phase)
        if t > brake_at:
            target = max(target - 4.0, 1.0)
        acc = np.zeros(n)
        acc[0] = np.clip(1.5 * (target - v[0]), -4.0, 2.0)
        for k in range(1, n):
            gap = s[k - 1] - s[k] - 4.5
            s_star = 2.0 + v[k] * 1.2 + v[k] * (v[k] - v[k - 1]) / (2 * np.sqrt(2.0 * 3.0))
            a = 2.0 * (1 - (v[k] / desired[k]) ** 4 - (max(s_star, 0) / max(gap, 0.1)) ** 2)
            acc[k] = np.clip(a, -8.0, 2.0)
        v = np.maximum(v + acc * dt, 0.0)
        s = s + v * dt
        if step >= warm - 1 and (step - warm + 1) % 4 == 0:
            out.append(s.copy())
    s_hist = np.array(out[:WINDOW])  # (15, n)
    return [origin + s_hist[:, k : k + 1] * u for k in range(n)]


def synthetic_scene(rng: np.random.Generator) -> Scene:
    """A few independent agent groups sharing one scene."""
    tracks, classes, cats = {}, {}, {}
    n_groups = int(rng.integers(1, 4))
    next_id = 0
    for g in range(n_groups):
        origin = rng.uniform(-30.0, 30.0, size=2)
        kind = CATEGORIES[int(rng.integers(3))]
        if kind == "constant":
            group = [_constant(rng, origin)]
        elif kind == "turning":
            group = [_turning(rng, origin)]
        else:
            group = _following(rng, origin, int(rng.integers(1, 3)))
        for tr in group:
            tracks[next_id] = tr
            classes[next_id] = "vehicle"
            cats[next_id] = kind
            next_id += 1
    return Scene(tracks, classes, cats)


def synthetic_corpus(n_scenes: int, seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    return [synthetic_scene(rng) for _ in range(n_scenes)]


def scene_batch(scene: Scene, agent_class: str = "vehicle") -> Batch:
    """Training inputs and targets for every agent of ``agent_class`` in a scene."""
    hist = [
        AgentHistory.from_positions(i, scene.classes[i], tr[:PAST]) for i, tr in scene.tracks.items()
    ]
    graph = build_scene_graph(hist)
    ids = [i for i in scene.tracks if scene.classes[i] == agent_class]
    futures = {i: future_velocities(scene.tracks[i][PAST - 1], scene.tracks[i][PAST:]) for i in ids}
    return make_batch(graph, ids, futures)


def corpus_arrays(scenes, agent_class: str = "vehicle"):
    """(Batch over all agents, future positions (N, 7, 2), category labels (N,))."""
    batches, truth, cats = [], [], []
    for sc in scenes:
        b = scene_batch(sc, agent_class)
        if len(b) == 0:
            continue
        batches.append(b)
        truth.extend(sc.tracks[i][PAST:] for i in b.ids)
        cats.extend(sc.category.get(i, "") for i in b.ids)
    return concat_batches(batches), np.array(truth), np.array(cats)


# -- simulator dataset files ------------------------------------------------------

FIELDS = ("episode_id", "t", "agent_id", "agent_class", "x", "y")


def write_records(path, rows, append: bool = False) -> None:
    mode = "a" if append else "w"
    with open(path, mode, newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for r in rows:
            w.writerow([r[0], r[1], r[2], r[3], repr(float(r[4])), repr(float(r[5]))])


def read_records(path) -> list:
    rows = []
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec:
                continue
            if len(rec) != len(FIELDS):
                raise ParseError(f"expected {len(FIELDS)} fields, got {len(rec)}", Path(path), lineno)
            try:
                rows.append((int(rec[0]), int(rec[1]), int(rec[2]), rec[3], float(rec[4]), float(rec[5])))
            except ValueError as exc:
                raise ParseError(str(exc), Path(path), lineno) from exc
    return rows


def scenes_from_records(rows, sample_stride: int = 4, window_stride: int = 2) -> list:
    """Cut recorded episodes into 15-sample windows (8 observed, 7 future).

    Agents present at every sample of a window become scene tracks.
    """
    by_ep: dict = {}
    for ep, t, aid, cls, x, y in rows:
        by_ep.setdefault(ep, {}).setdefault(t, {})[aid] = (cls, x, y)
    scenes = []
    for ep in sorted(by_ep):
        frames = by_ep[ep]
        times = sorted(frames)
        for start in range(0, len(times) - WINDOW + 1, window_stride):
            ts = times[start : start + WINDOW]
            if any(b - a != sample_stride for a, b in zip(ts, ts[1:])):
                continue
            common = set(frames[ts[0]])
            for t in ts[1:]:
                common &= set(frames[t])
            tracks, classes = {}, {}
            for aid in sorted(common):
                tracks[aid] = np.array([[frames[t][aid][1], frames[t][aid][2]] for t in ts])
                classes[aid] = frames[ts[0]][aid][0]
            if tracks:
                scenes.append(Scene(tracks, classes))
    return scenes
