"""Procedural towns: lane graphs with junctions, signals, stop signs and ramps.

Coordinates are meters in a right-handed world frame; headings are radians
counter-clockwise from +x. Traffic drives on the right.
"""

from __future__ import annotations

import functools
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from .geometry import bezier, polyline_headings, resample_polyline

PRESETS = ("urban", "highway", "mixed", "straight", "intersection")

LANE_WIDTH = 3.5
WAYPOINT_SPACING = 2.0
JUNCTION_RADIUS = 9.0  # stop line distance from intersection center
CROSSWALK_OFFSET = 7.75
SIDEWALK_OFFSET = 5.5  # from road centerline
BEAT_LENGTH = 15.0

# speed limits (m/s) and normalizing maximum velocity per preset
SPEED_TABLE = {
    "urban": {"road": 8.0, "junction": 6.0, "v_max": 10.0},
    "highway": {"road": 20.0, "ramp": 12.0, "v_max": 20.0},
    "mixed": {"road": 8.0, "junction": 6.0, "ramp": 12.0, "v_max": 15.0},
    "straight": {"road": 8.0, "v_max": 10.0},
    "intersection": {"road": 8.0, "junction": 6.0, "v_max": 10.0},
}

LIGHT_TIMING = (10.0, 3.0, 10.0)  # green, yellow, red seconds
GREEN, YELLOW, RED = "green", "yellow", "red"


@dataclass
class Lane:
    id: int
    waypoints: list
    kind: str  # road | junction | ramp
    road: int = -1
    intersection: int = -1
    turn: str | None = None


@dataclass
class TrafficLight:
    waypoint: int  # stop-line waypoint: last waypoint of the controlled lane
    intersection: int
    offset: float
    group: int

    def state(self, t: float, timing=LIGHT_TIMING) -> str:
        green, yellow, red = timing
        cycle = green + yellow + red
        # group 1 runs half a cycle out of phase with group 0
        phase = (t + self.offset + self.group * (green + yellow)) % cycle
        if phase < green:
            return GREEN
        if phase < green + yellow:
            return YELLOW
        return RED


@dataclass
class Crosswalk:
    a: np.ndarray
    b: np.ndarray
    road_dir: np.ndarray  # unit vector pointing away from the intersection along the road


@dataclass
class Intersection:
    center: np.ndarray
    signalized: bool
    stop_controlled: bool = False


@dataclass
class LaneGraph:
    preset: str
    seed: int
    xy: np.ndarray
    heading: np.ndarray
    width: np.ndarray
    speed_limit: np.ndarray
    lane_of: np.ndarray
    lanes: list
    succ: list  # lane-following successors per waypoint
    lane_changes: list  # lateral successors per waypoint (routing only)
    lights: list = field(default_factory=list)
    stop_signs: list = field(default_factory=list)
    crosswalks: list = field(default_factory=list)
    intersections: list = field(default_factory=list)
    merges: list = field(default_factory=list)
    v_max: float = 10.0
    light_timing: tuple = LIGHT_TIMING

    def __post_init__(self):
        src, dst = [], []
        for i, nxt in enumerate(self.succ):
            for j in nxt:
                src.append(i)
                dst.append(j)
        self.edge_src = np.array(src, dtype=np.int64)
        self.edge_dst = np.array(dst, dtype=np.int64)
        self.light_at = {lt.waypoint: lt for lt in self.lights}
        self.stop_sign_set = set(self.stop_signs)
        self.lane_kind = np.array([self.lanes[l].kind for l in self.lane_of])
        self.pred = [[] for _ in range(self.n_waypoints)]
        for i, nxt in enumerate(self.succ):
            for j in nxt:
                self.pred[j].append(i)

    @property
    def n_waypoints(self) -> int:
        return self.xy.shape[0]

    def edges(self):
        """All routable edges (i, j, length) including lane changes."""
        out = []
        for i in range(self.n_waypoints):
            for j in list(self.succ[i]) + list(self.lane_changes[i]):
                out.append((i, j, float(np.linalg.norm(self.xy[j] - self.xy[i]))))
        return out

    def spawn_points(self) -> list:
        return [w for lane in self.lanes if lane.kind == "road" for w in lane.waypoints]

    def segments(self):
        """Lane-following edge segments as arrays (a, b, width)."""
        return self.xy[self.edge_src], self.xy[self.edge_dst], self.width[self.edge_src]

    def light_state(self, waypoint: int, t: float) -> str | None:
        lt = self.light_at.get(waypoint)
        return None if lt is None else lt.state(t, self.light_timing)

    def to_bytes(self) -> bytes:
        meta = {
            "preset": self.preset,
            "seed": self.seed,
            "succ": self.succ,
            "lane_changes": self.lane_changes,
            "lanes": [[l.id, l.waypoints, l.kind, l.road, l.intersection, l.turn] for l in self.lanes],
            "lights": [[l.waypoint, l.intersection, l.offset, l.group] for l in self.lights],
            "stop_signs": self.stop_signs,
            "crosswalks": [[c.a.tolist(), c.b.tolist(), c.road_dir.tolist()] for c in self.crosswalks],
            "merges": self.merges,
            "v_max": self.v_max,
        }
        arrays = [self.xy, self.heading, self.width, self.speed_limit, self.lane_of.astype(np.float64)]
        return json.dumps(meta, sort_keys=True).encode() + b"".join(a.tobytes() for a in arrays)

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()


class _Builder:
    def __init__(self):
        self.xy, self.heading, self.width, self.limit, self.lane_of = [], [], [], [], []
        self.lanes: list[Lane] = []
        self.succ: list[list[int]] = []
        self.changes: list[list[int]] = []

    def add_lane(self, points, limit, kind, road=-1, intersection=-1, turn=None, resample=True, closed=False):
        pts = resample_polyline(points, WAYPOINT_SPACING) if resample else np.asarray(points, dtype=np.float64)
        if closed:
            pts = pts[:-1]
        heads = polyline_headings(np.vstack([pts, pts[:1]]) if closed else pts)[: len(pts)]
        lane = Lane(len(self.lanes), [], kind, road, intersection, turn)
        for p, h in zip(pts, heads):
            idx = len(self.xy)
            self.xy.append(p)
            self.heading.append(h)
            self.width.append(LANE_WIDTH)
            self.limit.append(limit)
            self.lane_of.append(lane.id)
            self.succ.append([])
            self.changes.append([])
            if lane.waypoints:
                self.succ[lane.waypoints[-1]].append(idx)
            lane.waypoints.append(idx)
        if closed:
            self.succ[lane.waypoints[-1]].append(lane.waypoints[0])
        self.lanes.append(lane)
        return lane

    def connect_curve(self, src: int, dst: int, limit, kind, intersection=-1, turn=None):
        """Join waypoint ``src`` to ``dst`` with a smooth curve of new waypoints."""
        p0, p3 = np.asarray(self.xy[src]), np.asarray(self.xy[dst])
        u0 = np.array([np.cos(self.heading[src]), np.sin(self.heading[src])])
        u3 = np.array([np.cos(self.heading[dst]), np.sin(self.heading[dst])])
        d = 0.4 * np.linalg.norm(p3 - p0)
        curve = resample_polyline(bezier(p0, p0 + d * u0, p3 - d * u3, p3, 96), WAYPOINT_SPACING)
        interior = curve[1:-1]
        if len(interior) == 0:
            self.succ[src].append(dst)
            return None
        lane = self.add_lane(interior, limit, kind, intersection=intersection, turn=turn, resample=False)
        # tangent headings including the endpoint directions
        full = np.vstack([p0, interior, p3])
        heads = polyline_headings(full)
        for k, w in enumerate(lane.waypoints):
            d_prev = full[k + 1] - full[k]
            d_next = full[k + 2] - full[k + 1]
            v = d_prev / np.linalg.norm(d_prev) + d_next / np.linalg.norm(d_next)
            self.heading[w] = float(np.arctan2(v[1], v[0])) if np.linalg.norm(v) > 1e-9 else heads[k + 1]
        self.succ[src].append(lane.waypoints[0])
        self.succ[lane.waypoints[-1]].append(dst)
        return lane

    def build(self, preset, seed, v_max, **extra) -> LaneGraph:
        return LaneGraph(
            preset=preset,
            seed=seed,
            xy=np.array(self.xy, dtype=np.float64).reshape(-1, 2),
            heading=np.array(self.heading, dtype=np.float64),
            width=np.array(self.width, dtype=np.float64),
            speed_limit=np.array(self.limit, dtype=np.float64),
            lane_of=np.array(self.lane_of, dtype=np.int64),
            lanes=self.lanes,
            succ=self.succ,
            lane_changes=self.changes,
            v_max=v_max,
            **extra,
        )


def _right(u):
    return np.array([u[1], -u[0]])


def _build_junctions(b: _Builder, centers, roads, table, rng, signalize, crosswalk_all=False):
    """Lanes for each road plus turn connectors, lights, stop signs and crosswalks.

    ``roads`` is a list of (node_a, node_b) index pairs into ``centers``;
    a node of degree 1 is a dead end (the lane simply stops there).
    """
    incoming = {i: [] for i in range(len(centers))}
    outgoing = {i: [] for i in range(len(centers))}
    for r, (a, c) in enumerate(roads):
        for s, e in ((a, c), (c, a)):
            ps, pe = centers[s], centers[e]
            length = np.linalg.norm(pe - ps)
            u = (pe - ps) / length
            off = _right(u) * (LANE_WIDTH / 2)
            start_pad = JUNCTION_RADIUS if degree_hint(s, roads) > 1 else 0.0
            end_pad = JUNCTION_RADIUS if degree_hint(e, roads) > 1 else 0.0
            lane = b.add_lane(
                np.array([ps + u * start_pad + off, pe - u * end_pad + off]), table["road"], "road", road=r
            )
            outgoing[s].append((lane, r, u))
            incoming[e].append((lane, r, u))
    intersections = []
    lights, stops, crosswalks = [], [], []
    for node, center in enumerate(centers):
        deg = degree_hint(node, roads)
        if deg <= 1:
            intersections.append(Intersection(center, False))
            continue
        signal = signalize(node, deg)
        stop = (not signal) and rng.random() < 0.5
        intersections.append(Intersection(center, signal, stop))
        for lane_in, r_in, u_in in incoming[node]:
            for lane_out, r_out, u_out in outgoing[node]:
                if r_out == r_in:
                    continue
                cross = u_in[0] * u_out[1] - u_in[1] * u_out[0]
                turn = "straight" if abs(cross) < 0.3 else ("left" if cross > 0 else "right")
                b.connect_curve(
                    lane_in.waypoints[-1], lane_out.waypoints[0], table["junction"], "junction", node, turn
                )
        if signal:
            offset = float(rng.uniform(0.0, sum(LIGHT_TIMING)))
            for lane_in, _, u_in in incoming[node]:
                group = 0 if abs(u_in[0]) >= abs(u_in[1]) else 1
                lights.append(TrafficLight(lane_in.waypoints[-1], node, offset, group))
        elif stop:
            stops.extend(lane_in.waypoints[-1] for lane_in, _, _ in incoming[node])
        if signal or crosswalk_all:
            for _, _, u_out in outgoing[node]:
                mid = center + u_out * CROSSWALK_OFFSET
                n = _right(u_out) * SIDEWALK_OFFSET
                crosswalks.append(Crosswalk(mid + n, mid - n, u_out.copy()))
    return intersections, lights, stops, crosswalks


def degree_hint(node, roads):
    return sum((a == node) + (c == node) for a, c in roads)


def _urban_grid(b: _Builder, rng, table, n=3):
    xs = np.concatenate([[0.0], np.cumsum(rng.uniform(60.0, 85.0, size=n - 1))])
    ys = np.concatenate([[0.0], np.cumsum(rng.uniform(60.0, 85.0, size=n - 1))])
    centers = [np.array([x, y]) for y in ys for x in xs]
    roads = []
    for j in range(n):
        for i in range(n):
            k = j * n + i
            if i + 1 < n:
                roads.append((k, k + 1))
            if j + 1 < n:
                roads.append((k, k + n))
    return centers, roads


def _add_bypass(b: _Builder, lane: Lane, offset: float, limit: float, frac=(0.2, 0.8)):
    """A parallel ramp leaving ``lane`` and merging back into it; returns the merge waypoint."""
    wps = lane.waypoints
    ia, ib = wps[int(len(wps) * frac[0])], wps[int(len(wps) * frac[1])]
    pa, pb = np.asarray(b.xy[ia]), np.asarray(b.xy[ib])
    u = (pb - pa) / np.linalg.norm(pb - pa)
    out = _right(u) * offset
    ramp_pts = np.array([pa + u * 25.0 + out, pb - u * 25.0 + out])
    ramp = b.add_lane(ramp_pts, limit, "ramp")
    b.connect_curve(ia, ramp.waypoints[0], limit, "ramp")
    b.connect_curve(ramp.waypoints[-1], ib, limit, "ramp")
    return ib


def _build_urban(seed, rng, preset="urban"):
    table = SPEED_TABLE[preset]
    b = _Builder()
    centers, roads = _urban_grid(b, rng, table)
    inter, lights, stops, cws = _build_junctions(b, centers, roads, table, rng, lambda node, deg: deg >= 3)
    merges = []
    if preset == "mixed":
        bottom = [lane for lane in b.lanes if lane.kind == "road" and lane.road == 0]
        # road 0 joins nodes 0 and 1 along the southern edge; its eastbound lane lies outside the grid
        east = [l for l in bottom if b.xy[l.waypoints[-1]][0] > b.xy[l.waypoints[0]][0]][0]
        merges.append(_add_bypass(b, east, 12.0, table["ramp"]))
    return b.build(
        preset,
        seed,
        table["v_max"],
        lights=lights,
        stop_signs=stops,
        crosswalks=cws,
        intersections=inter,
        merges=merges,
    )


def _rounded_rect(width, height, radius, n_arc=24):
    pts = []
    corners = [
        (np.array([width - radius, radius]), -np.pi / 2),
        (np.array([width - radius, height - radius]), 0.0),
        (np.array([radius, height - radius]), np.pi / 2),
        (np.array([radius, radius]), np.pi),
    ]
    for c, a0 in corners:
        for t in np.linspace(a0, a0 + np.pi / 2, n_arc):
            pts.append(c + radius * np.array([np.cos(t), np.sin(t)]))
    pts.append(pts[0])
    return np.array(pts)


def _offset_polyline(pts, dist):
    heads = polyline_headings(pts)
    normals = np.stack([np.sin(heads), -np.cos(heads)], axis=1)
    return pts + normals * dist


def _build_highway(seed, rng):
    table = SPEED_TABLE["highway"]
    b = _Builder()
    width = float(rng.uniform(320.0, 420.0))
    height = float(rng.uniform(160.0, 240.0))
    ring = _rounded_rect(width, height, 60.0)
    outer = b.add_lane(_offset_polyline(ring, LANE_WIDTH / 2), table["road"], "road", road=0, closed=True)
    inner = b.add_lane(_offset_polyline(ring, -LANE_WIDTH / 2), table["road"], "road", road=0, closed=True)
    n_in, n_out = len(inner.waypoints), len(outer.waypoints)
    for k, w in enumerate(inner.waypoints):
        b.changes[w].append(outer.waypoints[(int(round(k * n_out / n_in)) + 6) % n_out])
    for k, w in enumerate(outer.waypoints):
        b.changes[w].append(inner.waypoints[(int(round(k * n_in / n_out)) + 6) % n_in])
    # bottom straight of the outer lane hosts the ramp
    bottom = [w for w in outer.waypoints if b.xy[w][1] < 0.0 and 70.0 < b.xy[w][0] < width - 70.0]
    seg = Lane(-1, bottom, "road")
    merge = _add_bypass(b, seg, 14.0, table["ramp"], frac=(0.1, 0.9))
    return b.build("highway", seed, table["v_max"], merges=[merge])


def _build_straight(seed, rng):
    table = SPEED_TABLE["straight"]
    b = _Builder()
    length = 160.0
    b.add_lane(np.array([[0.0, -LANE_WIDTH / 2], [length, -LANE_WIDTH / 2]]), table["road"], "road", road=0)
    b.add_lane(np.array([[length, LANE_WIDTH / 2], [0.0, LANE_WIDTH / 2]]), table["road"], "road", road=0)
    return b.build("straight", seed, table["v_max"])


def _build_intersection(seed, rng):
    table = SPEED_TABLE["intersection"]
    b = _Builder()
    arm = 90.0 + JUNCTION_RADIUS
    centers = [np.zeros(2), np.array([arm, 0.0]), np.array([0.0, arm]), np.array([-arm, 0.0]), np.array([0.0, -arm])]
    roads = [(0, 1), (0, 2), (0, 3), (0, 4)]
    inter, lights, stops, cws = _build_junctions(b, centers, roads, table, rng, lambda node, deg: deg >= 3)
    return b.build(
        "intersection",
        seed,
        table["v_max"],
        lights=lights,
        stop_signs=stops,
        crosswalks=cws,
        intersections=inter,
    )


@functools.lru_cache(maxsize=32)
def build_town(preset: str, seed: int) -> LaneGraph:
    """Deterministic lane graph for ``(preset, seed)``."""
    if preset not in PRESETS:
        raise ConfigError(f"unknown town preset {preset!r}; expected one of {PRESETS}")
    rng = np.random.default_rng([int(seed), PRESETS.index(preset)])
    if preset in ("urban", "mixed"):
        return _build_urban(seed, rng, preset)
    if preset == "highway":
        return _build_highway(seed, rng)
    if preset == "straight":
        return _build_straight(seed, rng)
    return _build_intersection(seed, rng)
