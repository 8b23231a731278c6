"""Scripted background traffic: car-following vehicles and pedestrians."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .agents import PEDESTRIAN, VEHICLE, AgentState
from .geometry import point_segment_distance
from .town import BEAT_LENGTH, GREEN, RED, YELLOW, LaneGraph

LOOKAHEAD = 60.0
PEDESTRIAN_SPEED = 1.4

BEHAVIOR_TIERS = {
    # desired-speed factor range, time headway (s), max accel, comfortable decel
    "calm": ((0.75, 0.95), 1.8, 1.5, 2.5),
    "normal": ((0.85, 1.0), 1.4, 2.0, 3.0),
    "aggressive": ((0.95, 1.15), 0.9, 2.8, 4.0),
}


@dataclass
class IDMParams:
    v0_factor: float = 0.9
    headway: float = 1.4
    a_max: float = 2.0
    b_comf: float = 3.0
    min_gap: float = 2.0
    b_emergency: float = 8.0


@dataclass
class BackgroundVehicle:
    state: AgentState
    path: list
    s: float
    idm: IDMParams
    stop_cleared: set = field(default_factory=set)
    stop_timer: float = 0.0
    fixed_speed: float | None = None  # scripted constant desired speed (tests / scenarios)


@dataclass
class Pedestrian:
    state: AgentState
    crosswalk: int
    side: int  # 0: at endpoint a, 1: at endpoint b
    u: float  # distance along the sidewalk beat from the crosswalk end
    direction: float  # +1 walking away from the crosswalk, -1 walking back
    crossing: float = -1.0  # progress in [0, 1] while on the crosswalk, -1 otherwise


def _seg_len(graph: LaneGraph, a: int, b: int) -> float:
    return float(np.hypot(*(graph.xy[b] - graph.xy[a])))


def extend_path(graph: LaneGraph, path: list, rng: np.random.Generator, horizon: float = LOOKAHEAD) -> None:
    total = sum(_seg_len(graph, path[i], path[i + 1]) for i in range(len(path) - 1))
    while total < horizon:
        nxt = graph.succ[path[-1]]
        if not nxt:
            return
        choice = nxt[0] if len(nxt) == 1 else nxt[int(rng.integers(len(nxt)))]
        total += _seg_len(graph, path[-1], choice)
        path.append(choice)


def path_points(graph: LaneGraph, path: list, s: float):
    """Polyline ahead of a vehicle: current position then remaining waypoints.

    Returns (points, cumulative distances, waypoint id per point; -1 for the
    current position).
    """
    if len(path) < 2:
        p = graph.xy[path[0]][None, :]
        return p, np.zeros(1), np.array([path[0]])
    a, b = graph.xy[path[0]], graph.xy[path[1]]
    L = np.hypot(*(b - a))
    cur = a + (b - a) * (s / L if L > 0 else 0.0)
    pts = np.vstack([cur[None, :], graph.xy[path[1:]]])
    cum = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
    return pts, cum, np.concatenate([[-1], path[1:]])


def vehicle_pose(graph: LaneGraph, path: list, s: float):
    a, b = graph.xy[path[0]], graph.xy[path[1]] if len(path) > 1 else graph.xy[path[0]]
    d = b - a
    L = np.hypot(*d)
    if L == 0:
        return float(a[0]), float(a[1]), float(graph.heading[path[0]])
    p = a + d * (s / L)
    return float(p[0]), float(p[1]), float(np.arctan2(d[1], d[0]))


def find_leader(pts, cum, others, own_length, lateral=1.6, ped_lateral=2.5, heading_filter=True, always=()):
    """Nearest agent ahead along the polyline ``pts``.

    ``others`` is a list of AgentState. Vehicles count when within
    ``lateral`` of the path and roughly aligned with it (unless their id is
    in ``always``); pedestrians count within ``ped_lateral``. Returns
    (gap, speed along path, agent) or None.
    """
    if len(others) == 0 or len(pts) < 2:
        return None
    q = np.array([[o.x, o.y] for o in others])
    a, b = pts[:-1], pts[1:]
    dist, t = point_segment_distance(q[:, None, :], a[None, :, :], b[None, :, :])
    seg_len = np.hypot(*(b - a).T)
    along = cum[:-1][None, :] + t * seg_len[None, :]
    seg_heading = np.arctan2((b - a)[:, 1], (b - a)[:, 0])
    best = None
    for k, o in enumerate(others):
        lim = ped_lateral if o.cls == PEDESTRIAN else lateral + 0.5 * o.width - 1.0
        mask = (dist[k] <= lim) & (along[k] > 0.0)
        if not mask.any():
            continue
        m = int(np.argmax(mask))
        if o.cls == VEHICLE and heading_filter and o.id not in always:
            if abs((o.heading - seg_heading[m] + np.pi) % (2 * np.pi) - np.pi) > np.deg2rad(60):
                continue
        gap = float(along[k, m]) - 0.5 * own_length - 0.5 * (o.length if o.cls == VEHICLE else o.width)
        speed = o.speed * float(np.cos(o.heading - seg_heading[m])) if o.cls == VEHICLE else 0.0
        if best is None or gap < best[0]:
            best = (gap, max(speed, 0.0), o)
    return best


def idm_accel(v, v0, idm: IDMParams, gap=None, v_lead=0.0) -> float:
    acc = idm.a_max * (1.0 - (v / max(v0, 0.1)) ** 4)
    if gap is not None:
        s_star = idm.min_gap + max(0.0, v * idm.headway + v * (v - v_lead) / (2.0 * np.sqrt(idm.a_max * idm.b_comf)))
        acc -= idm.a_max * (s_star / max(gap, 0.1)) ** 2
    return float(np.clip(acc, -idm.b_emergency, idm.a_max))


def control_obstacles(graph: LaneGraph, pts, cum, ids, speed, time, own_length, b_comf, stop_cleared=()):
    """Stop lines ahead that act as stationary leaders: red/yellow lights and stop signs.

    Returns (gap, waypoint id, kind) of the nearest binding stop line or None.
    """
    for k in range(1, len(ids)):
        w = int(ids[k])
        state = graph.light_state(w, time)
        gap = float(cum[k]) - 0.5 * own_length
        if state == RED:
            return gap, w, "light"
        if state == YELLOW and gap > speed * speed / (2.0 * b_comf):
            return gap, w, "light"
        if w in graph.stop_sign_set and w not in stop_cleared:
            return gap, w, "stop"
    return None


def spawn_background(world, config) -> None:
    """Place background vehicles and pedestrians; records any shortfall on ``world``."""
    graph: LaneGraph = world.graph
    rng: np.random.Generator = world.rng
    tier = BEHAVIOR_TIERS[config.behavior]
    world.p_cross = float(rng.uniform(0.1, 0.5))
    ego = np.array([world.ego.x, world.ego.y])
    candidates = [w for w in graph.spawn_points() if graph.succ[w]]
    order = rng.permutation(len(candidates))
    placed = [ego]
    min_sep, ego_clear = 12.0, 20.0
    for idx in order:
        if len(world.vehicles) >= config.vehicles:
            break
        w = candidates[idx]
        p = graph.xy[w]
        if np.hypot(*(p - ego)) < ego_clear:
            continue
        if any(np.hypot(*(p - q)) < min_sep for q in placed):
            continue
        placed.append(p)
        world.add_vehicle(w, speed=float(rng.uniform(0.0, 0.8)) * graph.speed_limit[w], idm=_draw_idm(rng, tier))
    world.shortfall["vehicles"] = config.vehicles - len(world.vehicles)

    n_cw = len(graph.crosswalks)
    for _ in range(config.pedestrians):
        if n_cw == 0:
            break
        cw = int(rng.integers(n_cw))
        side = int(rng.integers(2))
        u = float(rng.uniform(0.0, BEAT_LENGTH))
        world.add_pedestrian(cw, side, u, direction=1.0 if rng.random() < 0.5 else -1.0)
    world.shortfall["pedestrians"] = config.pedestrians - len(world.pedestrians)


def _draw_idm(rng, tier) -> IDMParams:
    (lo, hi), headway, a_max, b_comf = tier
    return IDMParams(float(rng.uniform(lo, hi)), headway, a_max, b_comf)


def pedestrian_pose(graph: LaneGraph, ped: Pedestrian):
    cw = graph.crosswalks[ped.crosswalk]
    ends = (cw.a, cw.b)
    if ped.crossing >= 0.0:
        start, stop = ends[ped.side], ends[1 - ped.side]
        p = start + (stop - start) * ped.crossing
        d = stop - start
    else:
        p = ends[ped.side] + cw.road_dir * ped.u
        d = cw.road_dir * ped.direction
    return float(p[0]), float(p[1]), float(np.arctan2(d[1], d[0]))


def step_pedestrian(graph: LaneGraph, ped: Pedestrian, rng, p_cross: float, dt: float) -> None:
    cw = graph.crosswalks[ped.crosswalk]
    step = PEDESTRIAN_SPEED * dt
    if ped.crossing >= 0.0:
        ped.crossing += step / float(np.hypot(*(cw.b - cw.a)))
        if ped.crossing >= 1.0:
            ped.crossing = -1.0
            ped.side = 1 - ped.side
            ped.u = 0.0
            ped.direction = 1.0
    else:
        ped.u += ped.direction * step
        if ped.u >= BEAT_LENGTH:
            ped.u = BEAT_LENGTH
            ped.direction = -1.0
        elif ped.u <= 0.0:
            ped.u = 0.0
            if rng.random() < p_cross:
                ped.crossing = 0.0
            else:
                ped.direction = 1.0
    x, y, h = pedestrian_pose(graph, ped)
    ped.state.x, ped.state.y, ped.state.heading = x, y, h
    ped.state.speed = PEDESTRIAN_SPEED


def vehicle_accelerations(world, dt: float) -> list:
    """IDM acceleration for every background vehicle from the current snapshot."""
    graph: LaneGraph = world.graph
    agents = world.agent_states()
    out = []
    for veh in world.vehicles:
        st = veh.state
        pts, cum, ids = path_points(graph, veh.path, veh.s)
        others = [a for a in agents if a.id != st.id]
        leader = find_leader(pts, cum, others, st.length, always=(0,))
        limit = graph.speed_limit[veh.path[1] if len(veh.path) > 1 else veh.path[0]]
        v0 = veh.fixed_speed if veh.fixed_speed is not None else limit * veh.idm.v0_factor
        gap, v_lead = (leader[0], leader[1]) if leader is not None else (None, 0.0)
        ctrl = control_obstacles(
            graph, pts, cum, ids, st.speed, world.time, st.length, veh.idm.b_comf, veh.stop_cleared
        )
        if ctrl is not None:
            cgap, w, kind = ctrl
            if kind == "stop" and st.speed < 0.2 and cgap < 3.0:
                veh.stop_timer += dt
                if veh.stop_timer >= 1.0:
                    veh.stop_cleared.add(w)
                    veh.stop_timer = 0.0
            if gap is None or cgap < gap:
                gap, v_lead = cgap, 0.0
        out.append(idm_accel(st.speed, v0, veh.idm, gap, v_lead))
    return out


def advance_vehicle(world, veh: BackgroundVehicle, acc: float, dt: float) -> bool:
    """Integrate one vehicle; returns False when it ran off a dead end."""
    graph = world.graph
    st = veh.state
    st.speed = max(0.0, st.speed + acc * dt)
    veh.s += st.speed * dt
    while len(veh.path) > 1:
        L = _seg_len(graph, veh.path[0], veh.path[1])
        if veh.s < L:
            break
        veh.s -= L
        veh.stop_cleared.discard(veh.path.pop(0))
        extend_path(graph, veh.path, world.rng)
    if len(veh.path) < 2:
        return False
    st.x, st.y, st.heading = vehicle_pose(graph, veh.path, veh.s)
    return True


def recycle_vehicle(world, veh: BackgroundVehicle) -> None:
    """Respawn a vehicle that left the network at a free lane entry."""
    graph = world.graph
    agents = world.agent_states()
    pos = np.array([[a.x, a.y] for a in agents]) if agents else np.zeros((0, 2))
    entries = [l.waypoints[0] for l in graph.lanes if l.kind == "road" and not graph.pred[l.waypoints[0]]]
    pool = entries or [w for w in graph.spawn_points() if graph.succ[w]]
    for idx in world.rng.permutation(len(pool)):
        w = pool[idx]
        if len(pos) == 0 or np.min(np.hypot(*(pos - graph.xy[w]).T)) > 15.0:
            world.respawn_vehicle(veh, w)
            return
    world.respawn_vehicle(veh, pool[int(world.rng.integers(len(pool)))])
