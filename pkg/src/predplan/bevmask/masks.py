"""Context, past and predicted-future channel groups and the 21-channel stack."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ContractError, ParseError
from ..simworld.town import LANE_WIDTH, RED, YELLOW, LaneGraph
from .raster import (
    RasterSpec,
    stamp_discs,
    stamp_rectangles,
    stamp_segments,
    world_angle_to_pixel,
    world_to_pixel,
)

PAST_SNAPSHOTS = 4
PAST_STRIDE = 4
FUTURE_MASKS = 6
PEDESTRIAN_RADIUS = 0.6  # m
STOP_LINE_HALF_WIDTH = 0.5  # m
PATCH_TRUNCATION = 5.0  # patch support in standard deviations

CONTEXT_CHANNELS = ("road", "route", "lane_boundaries")
DYNAMIC_CHANNELS = ("vehicles", "pedestrians", "traffic_control")


@dataclass(frozen=True)
class Layout:
    """Channel semantics in stacking order."""

    context: tuple = CONTEXT_CHANNELS
    past_snapshots: int = PAST_SNAPSHOTS
    dynamic: tuple = DYNAMIC_CHANNELS
    future_steps: int = FUTURE_MASKS

    @property
    def groups(self) -> dict:
        return {
            "context": len(self.context),
            "past": self.past_snapshots * len(self.dynamic),
            "future": self.future_steps,
        }

    @property
    def channels(self) -> list:
        names = [f"context/{c}" for c in self.context]
        for k in range(self.past_snapshots):
            names += [f"past/t-{k * PAST_STRIDE}/{c}" for c in self.dynamic]
        names += [f"future/step{k + 1}" for k in range(self.future_steps)]
        return names

    @property
    def n_channels(self) -> int:
        return sum(self.groups.values())

    def to_config(self) -> dict:
        return {
            "context": list(self.context),
            "past_snapshots": self.past_snapshots,
            "dynamic": list(self.dynamic),
            "future_steps": self.future_steps,
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "Layout":
        return cls(tuple(cfg["context"]), int(cfg["past_snapshots"]), tuple(cfg["dynamic"]), int(cfg["future_steps"]))


DEFAULT_LAYOUT = Layout()


@dataclass
class MaskStack:
    data: np.ndarray  # (21, H, W) float64 in [0, 1]
    resolution: float
    anchor: tuple = field(default=(0, 0))
    layout: Layout = DEFAULT_LAYOUT

    @property
    def shape(self):
        return self.data.shape

    def channel(self, name: str) -> np.ndarray:
        return self.data[self.layout.channels.index(name)]


# -- context -------------------------------------------------------------------


def _bev_cache(graph: LaneGraph) -> dict:
    cache = getattr(graph, "_bev_cache", None)
    if cache is None:
        a, b, w = graph.segments()
        bounds = []
        for lane in graph.lanes:
            if lane.kind == "junction" or len(lane.waypoints) < 2:
                continue
            pts = graph.xy[lane.waypoints]
            h = graph.heading[lane.waypoints]
            n = np.stack([-np.sin(h), np.cos(h)], axis=1) * (LANE_WIDTH / 2)
            for side in (pts + n, pts - n):
                bounds.append(np.stack([side[:-1], side[1:]], axis=1))
        bounds = np.concatenate(bounds) if bounds else np.zeros((0, 2, 2))
        cache = {"road": (a, b, w), "bounds": bounds}
        graph._bev_cache = cache
    return cache


def _near(a, b, ego_xy, reach):
    return (np.abs(a - ego_xy).max(axis=1) <= reach) | (np.abs(b - ego_xy).max(axis=1) <= reach)


def render_context(graph: LaneGraph, route_pts, ego_pose, spec: RasterSpec = RasterSpec()) -> np.ndarray:
    """Drivable area, route corridor and lane boundaries as {0, 1} channels (3, H, W)."""
    size, res = spec.size, spec.resolution
    out = np.zeros((3, size, size), dtype=bool)
    ego_xy = np.array(ego_pose[:2], dtype=np.float64)
    reach = spec.half_extent + LANE_WIDTH
    cache = _bev_cache(graph)
    a, b, w = cache["road"]
    m = _near(a, b, ego_xy, reach)
    if m.any():
        pa, _ = world_to_pixel(a[m], ego_pose, res, size)
        pb, _ = world_to_pixel(b[m], ego_pose, res, size)
        stamp_segments(out[0], pa, pb, w[m] / 2 / res)
    route_pts = np.asarray(route_pts, dtype=np.float64).reshape(-1, 2)
    if len(route_pts) >= 2:
        ra, rb = route_pts[:-1], route_pts[1:]
        m = _near(ra, rb, ego_xy, reach)
        if m.any():
            pa, _ = world_to_pixel(ra[m], ego_pose, res, size)
            pb, _ = world_to_pixel(rb[m], ego_pose, res, size)
            stamp_segments(out[1], pa, pb, LANE_WIDTH / 2 / res)
    bounds = cache["bounds"]
    if len(bounds):
        m = _near(bounds[:, 0], bounds[:, 1], ego_xy, reach)
        if m.any():
            pa, _ = world_to_pixel(bounds[m, 0], ego_pose, res, size)
            pb, _ = world_to_pixel(bounds[m, 1], ego_pose, res, size)
            stamp_segments(out[2], pa, pb, 0.5)
    return out.astype(np.float64)


# -- past ---------------------------------------------------------------------


def _dynamic_channels(agents, controls, ego_pose, spec: RasterSpec, exclude_id=0) -> np.ndarray:
    """Vehicles, pedestrians and active stop lines for one snapshot."""
    size, res = spec.size, spec.resolution
    out = np.zeros((3, size, size), dtype=bool)
    vehicles = [a for a in agents if a.cls == "vehicle" and a.id != exclude_id]
    peds = [a for a in agents if a.cls == "pedestrian"]
    if vehicles:
        xy = np.array([[a.x, a.y] for a in vehicles])
        px, _ = world_to_pixel(xy, ego_pose, res, size)
        ang = world_angle_to_pixel(np.array([a.heading for a in vehicles]), ego_pose[2])
        stamp_rectangles(
            out[0],
            px,
            ang,
            np.array([a.length for a in vehicles]) / 2 / res,
            np.array([a.width for a in vehicles]) / 2 / res,
        )
    if peds:
        xy = np.array([[a.x, a.y] for a in peds])
        px, _ = world_to_pixel(xy, ego_pose, res, size)
        stamp_discs(out[1], px, max(PEDESTRIAN_RADIUS / res, 0.5))
    if len(controls):
        ca, cb = controls[:, 0], controls[:, 1]
        pa, _ = world_to_pixel(ca, ego_pose, res, size)
        pb, _ = world_to_pixel(cb, ego_pose, res, size)
        stamp_segments(out[2], pa, pb, max(STOP_LINE_HALF_WIDTH / res, 0.5))
    return out


def active_stop_lines(graph: LaneGraph, t: float, ego_xy=None, reach: float = np.inf) -> np.ndarray:
    """Stop-line segments (N, 2, 2) for red or yellow lights and every stop sign."""
    wps = [lt.waypoint for lt in graph.lights if lt.state(t, graph.light_timing) in (RED, YELLOW)]
    wps += list(graph.stop_signs)
    if ego_xy is not None:
        wps = [w for w in wps if np.abs(graph.xy[w] - ego_xy).max() <= reach]
    if not wps:
        return np.zeros((0, 2, 2))
    p = graph.xy[wps]
    h = graph.heading[wps]
    n = np.stack([-np.sin(h), np.cos(h)], axis=1) * (LANE_WIDTH / 2)
    return np.stack([p + n, p - n], axis=1)


def render_past(graph: LaneGraph, snapshots, ego_pose, dt: float, spec: RasterSpec = RasterSpec(), exclude_id=0) -> np.ndarray:
    """Four snapshots (newest first: t, t-4, t-8, t-12 steps) x 3 binary channels.

    ``snapshots`` is the world history (oldest first). Missing snapshots at
    the start of an episode leave their channels zero.
    """
    size = spec.size
    out = np.zeros((PAST_SNAPSHOTS * 3, size, size))
    snaps = list(snapshots)
    ego_xy = np.array(ego_pose[:2], dtype=np.float64)
    reach = spec.half_extent + 5.0
    for k in range(PAST_SNAPSHOTS):
        idx = len(snaps) - 1 - k * PAST_STRIDE
        if idx < 0:
            break
        snap = snaps[idx]
        agents = [a for a in snap.agents.values() if np.abs(np.array([a.x, a.y]) - ego_xy).max() <= reach]
        controls = active_stop_lines(graph, snap.step * dt, ego_xy, reach)
        out[3 * k : 3 * k + 3] = _dynamic_channels(agents, controls, ego_pose, spec, exclude_id)
    return out


# -- future -------------------------------------------------------------------


def gaussian_patch(channel: np.ndarray, center, sigma_px: float) -> None:
    """Max-combine exp(-d^2 / (2 sigma^2)) centered on integer pixel ``center`` (col, row)."""
    if not sigma_px > 0:
        raise ValueError(f"patch sigma must be positive, got {sigma_px}")
    H, W = channel.shape
    cx, cy = int(center[0]), int(center[1])
    r = int(np.ceil(PATCH_TRUNCATION * sigma_px))
    c0, c1 = max(cx - r, 0), min(cx + r, W - 1)
    r0, r1 = max(cy - r, 0), min(cy + r, H - 1)
    if c0 > c1 or r0 > r1:
        return
    dx = np.arange(c0, c1 + 1, dtype=np.float64)[None, :] - cx
    dy = np.arange(r0, r1 + 1, dtype=np.float64)[:, None] - cy
    g = np.exp(-(dx * dx + dy * dy) / (2.0 * sigma_px * sigma_px))
    np.maximum(channel[r0 : r1 + 1, c0 : c1 + 1], g, out=channel[r0 : r1 + 1, c0 : c1 + 1])


def render_future(predictions, ego_pose, spec: RasterSpec = RasterSpec()) -> np.ndarray:
    """Gaussian occupancy for the first six predicted steps of every vehicle.

    ``predictions`` is an iterable of objects with ``positions`` (>= 6, 2)
    in meters and ``sigma`` (>= 6,) in meters. Centers snap to the nearest
    pixel so each visible prediction peaks at exactly 1.
    """
    size, res = spec.size, spec.resolution
    out = np.zeros((FUTURE_MASKS, size, size))
    margin = PATCH_TRUNCATION
    for pred in predictions:
        px, _ = world_to_pixel(np.asarray(pred.positions)[:FUTURE_MASKS], ego_pose, res, size)
        for k in range(FUTURE_MASKS):
            s = float(pred.sigma[k]) / res
            c, r = np.rint(px[k])
            if -margin * s <= c < size + margin * s and -margin * s <= r < size + margin * s:
                gaussian_patch(out[k], (c, r), s)
    return out


# -- stacking and serialization ------------------------------------------------


def stack(context, past, future, resolution: float = 0.25, layout: Layout = DEFAULT_LAYOUT) -> MaskStack:
    groups = {"context": np.asarray(context), "past": np.asarray(past), "future": np.asarray(future)}
    expected = layout.groups
    shape = None
    for name, arr in groups.items():
        if arr.ndim != 3 or arr.shape[0] != expected[name]:
            raise ContractError(f"mask group {name!r}: expected {expected[name]} channels, got shape {arr.shape}")
        if shape is None:
            shape = arr.shape[1:]
        elif arr.shape[1:] != shape:
            raise ContractError(f"mask group {name!r}: spatial shape {arr.shape[1:]} != {shape}")
        if not np.all(np.isfinite(arr)) or arr.min(initial=0.0) < 0.0 or arr.max(initial=0.0) > 1.0:
            raise ContractError(f"mask group {name!r}: values outside [0, 1]")
    data = np.concatenate([groups["context"], groups["past"], groups["future"]]).astype(np.float64)
    return MaskStack(data, float(resolution), (shape[1] // 2, shape[0] // 2), layout)


_HEADER = struct.Struct("<IIId")


def dump_raster(ms: MaskStack) -> bytes:
    c, h, w = ms.data.shape
    return _HEADER.pack(c, h, w, ms.resolution) + np.ascontiguousarray(ms.data, dtype="<f8").tobytes()


def load_raster(blob: bytes, source=None) -> MaskStack:
    if len(blob) < _HEADER.size:
        raise ParseError("raster dump shorter than its header", source)
    c, h, w, res = _HEADER.unpack_from(blob)
    n = c * h * w * 8
    if len(blob) != _HEADER.size + n:
        raise ParseError(f"raster payload has {len(blob) - _HEADER.size} bytes, expected {n}", source)
    data = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size).reshape(c, h, w).astype(np.float64)
    return MaskStack(data, res, (w // 2, h // 2))


def save_raster(path, ms: MaskStack) -> None:
    Path(path).write_bytes(dump_raster(ms))


def read_raster(path) -> MaskStack:
    return load_raster(Path(path).read_bytes(), Path(path))


def export_pgm(ms: MaskStack, directory) -> list:
    """Write one 8-bit greyscale PGM per channel; returns the paths."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, name in enumerate(ms.layout.channels):
        img = np.rint(np.clip(ms.data[k], 0.0, 1.0) * 255).astype(np.uint8)
        p = d / f"{k:02d}_{name.replace('/', '_')}.pgm"
        h, w = img.shape
        p.write_bytes(f"P5\n{w} {h}\n255\n".encode() + img.tobytes())
        paths.append(p)
    return paths
