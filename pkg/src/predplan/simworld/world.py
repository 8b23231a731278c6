"""Episode world: ego, background traffic, reward and termination rules."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, NoRouteError, StateError
from .agents import PEDESTRIAN, VEHICLE, ActionCommand, AgentState, BicycleParams, EgoVehicle
from .geometry import heading_error, point_segment_distance, rect_corners, rects_overlap
from .routing import Route, plan_route
from .town import LANE_WIDTH, RED, LaneGraph, build_town
from .traffic import (
    BEHAVIOR_TIERS,
    BackgroundVehicle,
    IDMParams,
    Pedestrian,
    advance_vehicle,
    extend_path,
    pedestrian_pose,
    recycle_vehicle,
    spawn_background,
    step_pedestrian,
    vehicle_accelerations,
    vehicle_pose,
)

HALT_SPEED = 0.1
STEER_JITTER = 0.01
PEDESTRIAN_SIZE = 0.6
STOP_ZONE = 8.0  # approach distance (m) in which a full stop satisfies a stop sign
GOAL_TOLERANCE = 2.0
VEHICLE_HALT = 30.0  # s standing still before a halt is counted as an infraction
RED_WAIT_REACH = 15.0  # m; halts this close before a red light are excused


class TerminationKind(enum.Enum):
    VEHICLE_COLLISION = "vehicle-collision"
    PEDESTRIAN_COLLISION = "pedestrian-collision"
    LAYOUT_COLLISION = "layout-collision"
    ROUTE_DEVIATION = "route-deviation"
    TRAFFIC_HALT = "traffic-halt"
    RED_LIGHT = "red-light"
    STOP_SIGN = "stop-sign"
    MAX_STEPS = "max-steps"
    DESTINATION_REACHED = "destination-reached"

    @property
    def category(self) -> str:
        """One of the six coarse termination classes."""
        if self in (TerminationKind.VEHICLE_COLLISION, TerminationKind.PEDESTRIAN_COLLISION, TerminationKind.LAYOUT_COLLISION):
            return "collision"
        if self in (TerminationKind.RED_LIGHT, TerminationKind.STOP_SIGN):
            return "violation"
        return self.value


@dataclass
class EpisodeConfig:
    seed: int = 0
    town: str = "urban"
    town_seed: int | None = None  # defaults to ``seed``
    vehicles: int = 0
    pedestrians: int = 0
    obs_noise: float = 0.0
    max_steps: int = 1000
    dt: float = 0.1
    behavior: str = "normal"
    min_route_length: float = 80.0
    max_route_length: float = 400.0
    terminate_on_violation: bool = True
    halt_horizon: float = 90.0
    deviation_limit: float = 3.5

    def validate(self) -> "EpisodeConfig":
        if self.max_steps <= 0:
            raise ConfigError(f"max_steps must be positive, got {self.max_steps}")
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.vehicles < 0 or self.pedestrians < 0:
            raise ConfigError("agent counts must be non-negative")
        if self.obs_noise < 0:
            raise ConfigError(f"obs_noise must be non-negative, got {self.obs_noise}")
        if self.behavior not in BEHAVIOR_TIERS:
            raise ConfigError(f"unknown behavior tier {self.behavior!r}; expected one of {sorted(BEHAVIOR_TIERS)}")
        return self


@dataclass
class RewardBreakdown:
    r_route: float
    r_halt: float
    r_vel: float
    r_pos: float
    r_hd: float
    r_act: float

    @property
    def total(self) -> float:
        return self.r_route + self.r_halt + self.r_vel + self.r_pos + self.r_hd + self.r_act

    def as_tuple(self):
        return (self.r_route, self.r_halt, self.r_vel, self.r_pos, self.r_hd, self.r_act)


def reward_components(
    deviation, speed, heading_err, steering, prev_steering, v_assigned, v_max, deviation_limit=3.5
) -> RewardBreakdown:
    """Per-step shaped reward.

    ``deviation`` is the lateral distance (m) from the route centerline and
    also drives the route-deviation penalty. Speeds are clamped to
    [0, v_max] and the heading error is wrapped to [0, pi].
    """
    if not v_max > 0:
        raise ValueError(f"v_max must be positive, got {v_max}")
    x_lat = max(float(deviation), 0.0)
    v = float(np.clip(speed, 0.0, v_max))
    va = float(np.clip(v_assigned, 0.0, v_max))
    hd = float(heading_error(heading_err, 0.0))
    return RewardBreakdown(
        r_route=-1.0 if x_lat >= deviation_limit else 0.0,
        r_halt=-1.0 if v <= HALT_SPEED else 0.0,
        r_vel=1.0 - abs(v - va) / v_max,
        r_pos=-0.5 * x_lat,
        r_hd=-hd,
        r_act=-0.1 if abs(float(steering) - float(prev_steering)) > STEER_JITTER else 0.0,
    )


@dataclass
class StepResult:
    world: "World"
    reward: RewardBreakdown
    done: bool
    kind: TerminationKind | None


@dataclass
class Counters:
    vehicle_collisions: int = 0
    pedestrian_collisions: int = 0
    layout_collisions: int = 0
    red_lights: int = 0
    stop_signs: int = 0
    route_deviations: int = 0
    blocked: int = 0
    lights_met: int = 0
    lights_run: int = 0
    vehicle_halts: int = 0
    outside_lane_steps: int = 0
    steps: int = 0
    distance: float = 0.0
    return_: float = 0.0


@dataclass
class Snapshot:
    step: int
    agents: dict = field(default_factory=dict)  # id -> AgentState


class World:
    """One episode. All randomness comes from generators seeded by ``config.seed``."""

    def __init__(self, config: EpisodeConfig, route: tuple | None = None, spawn: bool = True):
        self.config = config.validate()
        town_seed = config.seed if config.town_seed is None else config.town_seed
        self.graph: LaneGraph = build_town(config.town, int(town_seed))
        base = int(config.seed)
        self.route_rng = np.random.default_rng([base, 0])
        self.rng = np.random.default_rng([base, 1])
        self.obs_rng = np.random.default_rng([base, 2])
        self.dt = float(config.dt)
        self.time = 0.0
        self.step_count = 0
        self.vehicles: list[BackgroundVehicle] = []
        self.pedestrians: list[Pedestrian] = []
        self.shortfall = {"vehicles": 0, "pedestrians": 0}
        self.p_cross = 0.0
        self._next_id = 1
        self.route = self._choose_route(route)
        self._init_route_geometry()
        start = self.route.waypoints[0]
        params = BicycleParams(v_cap=self.graph.v_max)
        self.ego = EgoVehicle(*self.graph.xy[start], self.graph.heading[start], 0.0, params)
        self.prev_steering = 0.0
        self.counters = Counters()
        self.done = False
        self.kind: TerminationKind | None = None
        self.halt_time = 0.0
        self.progress = 0.0
        self.deviation = 0.0
        self.heading_err = 0.0
        self.history: deque = deque(maxlen=64)
        self.memory: dict = {}  # scratch space for scripted controllers
        if spawn:
            spawn_background(self, config)
        self._update_route_tracking(full_search=True)
        self._record()

    # -- construction helpers -------------------------------------------------
    def _choose_route(self, route) -> Route:
        g = self.graph
        if route is not None:
            return plan_route(g, int(route[0]), int(route[1]))
        if g.preset == "straight":
            lane = g.lanes[0]
            return plan_route(g, lane.waypoints[0], lane.waypoints[-1])
        spawns = g.spawn_points()
        lo, hi = self.config.min_route_length, self.config.max_route_length
        best = None
        for _ in range(200):
            src = spawns[int(self.route_rng.integers(len(spawns)))]
            dst = spawns[int(self.route_rng.integers(len(spawns)))]
            if src == dst:
                continue
            try:
                r = plan_route(g, src, dst)
            except NoRouteError:
                continue
            if lo <= r.length <= hi:
                return r
            if best is None or abs(r.length - lo) < abs(best.length - lo):
                best = r
        if best is None:
            raise NoRouteError(f"could not sample a route in town {g.preset!r}")
        return best

    def _init_route_geometry(self):
        g = self.graph
        wps = self.route.waypoints
        pts = g.xy[wps]
        if len(pts) == 1:
            pts = np.vstack([pts, pts + 1e-6 * np.array([np.cos(g.heading[wps[0]]), np.sin(g.heading[wps[0]])])])
        self.route_pts = pts
        seg = np.diff(pts, axis=0)
        self.route_seg_len = np.hypot(seg[:, 0], seg[:, 1])
        self.route_cum = np.concatenate([[0.0], np.cumsum(self.route_seg_len)])
        self.route_seg_heading = np.arctan2(seg[:, 1], seg[:, 0])
        self.route_length = float(self.route_cum[-1])
        self.route_seg = 0
        self.route_lights = [(float(self.route_cum[k]), w) for k, w in enumerate(wps) if w in g.light_at]
        self.route_stops = [(float(self.route_cum[k]), w) for k, w in enumerate(wps) if w in g.stop_sign_set]
        self._stop_min_speed: dict = {}

    def _new_id(self) -> int:
        i = self._next_id
        self._next_id += 1
        return i

    def add_vehicle(self, waypoint: int, speed: float = 0.0, idm: IDMParams | None = None, fixed_speed=None, s: float = 0.0):
        """Place a background vehicle at ``waypoint`` (``s`` meters along its outgoing edge)."""
        g = self.graph
        path = [int(waypoint)]
        extend_path(g, path, self.rng)
        st = AgentState(self._new_id(), VEHICLE, 0.0, 0.0, 0.0, float(speed), 4.5, 2.0)
        veh = BackgroundVehicle(st, path, float(s), idm or IDMParams(), fixed_speed=fixed_speed)
        st.x, st.y, st.heading = vehicle_pose(g, path, veh.s)
        self.vehicles.append(veh)
        return veh

    def respawn_vehicle(self, veh: BackgroundVehicle, waypoint: int) -> None:
        veh.path = [int(waypoint)]
        extend_path(self.graph, veh.path, self.rng)
        veh.s = 0.0
        veh.stop_cleared = set()
        veh.stop_timer = 0.0
        veh.state.id = self._new_id()
        veh.state.speed = 0.5 * float(self.graph.speed_limit[waypoint])
        veh.state.x, veh.state.y, veh.state.heading = vehicle_pose(self.graph, veh.path, 0.0)

    def add_pedestrian(self, crosswalk: int, side: int, u: float, direction: float = 1.0):
        st = AgentState(self._new_id(), PEDESTRIAN, 0.0, 0.0, 0.0, 1.4, PEDESTRIAN_SIZE, PEDESTRIAN_SIZE)
        ped = Pedestrian(st, int(crosswalk), int(side), float(u), float(direction))
        st.x, st.y, st.heading = pedestrian_pose(self.graph, ped)
        self.pedestrians.append(ped)
        return ped

    # -- queries ----------------------------------------------------------------
    def agent_states(self, include_ego: bool = True) -> list:
        out = [self.ego.state()] if include_ego else []
        out.extend(v.state for v in self.vehicles)
        out.extend(p.state for p in self.pedestrians)
        return out

    def observed_agents(self) -> list:
        """Non-ego agents with Gaussian position noise of std ``obs_noise``."""
        agents = [a.copy() for a in self.agent_states(include_ego=False)]
        sigma = self.config.obs_noise
        if sigma > 0 and agents:
            noise = self.obs_rng.normal(0.0, sigma, size=(len(agents), 2))
            for a, n in zip(agents, noise):
                a.x += float(n[0])
                a.y += float(n[1])
        return agents

    @property
    def v_assigned(self) -> float:
        k = min(self.route_seg + 1, len(self.route.waypoints) - 1)
        return float(self.graph.speed_limit[self.route.waypoints[k]])

    @property
    def completion(self) -> float:
        if self.route_length <= 0:
            return 1.0
        return float(np.clip(self.progress / self.route_length, 0.0, 1.0))

    def route_ahead(self, distance: float):
        """Route polyline from the ego's projection forward by ``distance`` meters.

        Returns (points, cumulative distances, waypoint ids; -1 for the first point).
        """
        k = self.route_seg
        p0 = self.route_pts[k] + (self.route_pts[k + 1] - self.route_pts[k]) * (
            (self.progress - self.route_cum[k]) / max(self.route_seg_len[k], 1e-12)
        )
        end = int(np.searchsorted(self.route_cum, self.progress + distance, side="right"))
        idx = list(range(k + 1, min(max(end + 1, k + 2), len(self.route_pts))))
        pts = np.vstack([p0[None, :], self.route_pts[idx]])
        cum = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
        wps = self.route.waypoints
        ids = np.array([-1] + [wps[i] if i < len(wps) else -1 for i in idx])
        return pts, cum, ids

    # -- dynamics ----------------------------------------------------------------
    def step(self, cmd: ActionCommand) -> StepResult:
        if self.done:
            raise StateError("step() called on a terminated episode; start a new World")
        cmd = cmd.clamped()
        dt = self.dt
        accs = vehicle_accelerations(self, dt)
        x0, y0 = self.ego.x, self.ego.y
        self.ego.apply(cmd, dt)
        self.counters.distance += float(np.hypot(self.ego.x - x0, self.ego.y - y0))
        for veh, a in zip(self.vehicles, accs):
            if not advance_vehicle(self, veh, a, dt):
                recycle_vehicle(self, veh)
        for ped in self.pedestrians:
            step_pedestrian(self.graph, ped, self.rng, self.p_cross, dt)
        self.time = (self.step_count + 1) * dt
        self.step_count += 1

        prev_progress = self.progress
        self._update_route_tracking()
        reward = reward_components(
            self.deviation,
            self.ego.speed,
            self.heading_err,
            cmd.steering,
            self.prev_steering,
            self.v_assigned,
            self.graph.v_max,
            self.config.deviation_limit,
        )
        self.prev_steering = cmd.steering
        self.counters.return_ += reward.total
        kind = self._check_termination(prev_progress)
        if kind is not None:
            self.done = True
            self.kind = kind
        self._record()
        return StepResult(self, reward, self.done, self.kind)

    def _update_route_tracking(self, full_search: bool = False):
        p = np.array([self.ego.x, self.ego.y])
        n = len(self.route_seg_len)
        lo, hi = (0, n) if full_search else (max(self.route_seg - 2, 0), min(self.route_seg + 12, n))
        a, b = self.route_pts[lo:hi], self.route_pts[lo + 1 : hi + 1]
        d, t = point_segment_distance(p[None, :], a, b)
        k = int(np.argmin(d))
        seg = lo + k
        self.route_seg = seg
        self.deviation = float(d[k])
        self.progress = float(self.route_cum[seg] + t[k] * self.route_seg_len[seg])
        self.heading_err = float(heading_error(self.ego.heading, self.route_seg_heading[seg]))

    def _check_termination(self, prev_progress: float) -> TerminationKind | None:
        cfg, c = self.config, self.counters
        ego = self.ego
        c.steps += 1
        if self.deviation > LANE_WIDTH / 2:
            c.outside_lane_steps += 1
        ego_box = rect_corners(ego.x, ego.y, ego.heading, ego.params.length, ego.params.width)
        for a in self.agent_states(include_ego=False):
            if np.hypot(a.x - ego.x, a.y - ego.y) > 8.0:
                continue
            if rects_overlap(ego_box, rect_corners(a.x, a.y, a.heading, a.length, a.width)):
                if a.cls == VEHICLE:
                    c.vehicle_collisions += 1
                    return TerminationKind.VEHICLE_COLLISION
                c.pedestrian_collisions += 1
                return TerminationKind.PEDESTRIAN_COLLISION
        if self._off_road():
            c.layout_collisions += 1
            return TerminationKind.LAYOUT_COLLISION

        violation = None
        for pos, w in self.route_lights:
            if prev_progress < pos <= self.progress:
                c.lights_met += 1
                if self.graph.light_state(w, self.time) == RED:
                    c.lights_run += 1
                    c.red_lights += 1
                    violation = violation or TerminationKind.RED_LIGHT
        for pos, w in self.route_stops:
            if pos - STOP_ZONE <= self.progress < pos or prev_progress < pos <= self.progress:
                self._stop_min_speed[w] = min(self._stop_min_speed.get(w, np.inf), ego.speed)
            if prev_progress < pos <= self.progress:
                if self._stop_min_speed.get(w, np.inf) > HALT_SPEED:
                    c.stop_signs += 1
                    violation = violation or TerminationKind.STOP_SIGN
        if violation is not None and cfg.terminate_on_violation:
            return violation

        if self.deviation >= cfg.deviation_limit:
            c.route_deviations += 1
            return TerminationKind.ROUTE_DEVIATION
        prev_halt = self.halt_time
        self.halt_time = self.halt_time + self.dt if ego.speed <= HALT_SPEED else 0.0
        if prev_halt < VEHICLE_HALT - 1e-9 <= self.halt_time and not self._waiting_at_red():
            c.vehicle_halts += 1
        if self.halt_time >= cfg.halt_horizon - 1e-9:
            c.blocked += 1
            return TerminationKind.TRAFFIC_HALT
        if self.progress >= self.route_length - GOAL_TOLERANCE:
            return TerminationKind.DESTINATION_REACHED
        if self.step_count >= cfg.max_steps:
            return TerminationKind.MAX_STEPS
        return None

    def _waiting_at_red(self) -> bool:
        for pos, w in self.route_lights:
            if 0.0 <= pos - self.progress <= RED_WAIT_REACH and self.graph.light_state(w, self.time) == RED:
                return True
        return False

    def _off_road(self) -> bool:
        a, b, _ = self.graph.segments()
        p = np.array([self.ego.x, self.ego.y])
        near = np.abs(a - p).max(axis=1) < 40.0
        if not near.any():
            return True
        d, _ = point_segment_distance(p[None, :], a[near], b[near])
        return bool(d.min() > 1.5 * LANE_WIDTH)

    def _record(self):
        self.history.append(Snapshot(self.step_count, {a.id: a.copy() for a in self.agent_states()}))

    @property
    def end_reached(self) -> bool:
        return self.kind == TerminationKind.DESTINATION_REACHED

    def trajectory_records(self, episode_id: int, every: int = 4):
        """Dataset rows ``(episode_id, t, agent_id, class, x, y)`` for the current step."""
        if self.step_count % every:
            return []
        return [(episode_id, self.step_count, a.id, a.cls, a.x, a.y) for a in self.agent_states()]


def make_world(config: EpisodeConfig, **kw) -> World:
    return World(config, **kw)
