"""Scripted roaming driver used to collect trajectory datasets."""

from __future__ import annotations

import numpy as np

from .agents import ActionCommand
from .traffic import IDMParams, control_obstacles, find_leader, idm_accel

EGO_IDM = IDMParams(v0_factor=0.95, headway=1.5, a_max=2.5, b_comf=2.5, min_gap=4.0, b_emergency=3.0)
SPEED_MARGIN = 0.95
SCAN = 50.0


def _pursuit_steering(world, pts, cum) -> float:
    ego = world.ego
    p = ego.params
    look = max(4.0, 0.6 * ego.speed + 3.0)
    k = int(np.searchsorted(cum, look))
    target = pts[min(k, len(pts) - 1)]
    d = target - np.array([ego.x, ego.y])
    alpha = np.arctan2(d[1], d[0]) - ego.heading
    alpha = (alpha + np.pi) % (2 * np.pi) - np.pi
    ld = max(float(np.hypot(*d)), 1e-3)
    delta = np.arctan(2.0 * p.wheelbase * np.sin(alpha) / ld)
    # positive command steers right, i.e. negative wheel angle
    return float(np.clip(-delta / p.steer_max, -1.0, 1.0))


def _target_speed(world, pts, cum, ids) -> float:
    g = world.graph
    limit = world.v_assigned
    v0 = SPEED_MARGIN * limit
    # slow down ahead of lower limits (e.g. junction connectors)
    for k in range(1, len(ids)):
        if ids[k] < 0:
            continue
        lim = SPEED_MARGIN * float(g.speed_limit[ids[k]])
        v0 = min(v0, float(np.sqrt(lim * lim + 2.0 * EGO_IDM.b_comf * max(cum[k - 1] - 2.0, 0.0))))
    return v0


def _speed_envelope(world, cum, ids, decel=2.0) -> float:
    # the limit of waypoint k applies once the ego passes waypoint k - 1
    g = world.graph
    env = world.v_assigned
    for k in range(1, len(ids)):
        if ids[k] >= 0:
            lim = float(g.speed_limit[ids[k]])
            env = min(env, float(np.sqrt(lim * lim + 2.0 * decel * max(cum[k - 1] - world.ego.speed * world.dt, 0.0))))
    return env


def roaming_policy(world) -> ActionCommand:
    """Pure-pursuit steering with car-following speed control along the ego route."""
    ego = world.ego
    mem = world.memory.setdefault("roaming", {"stop_cleared": set(), "stop_timer": 0.0})
    pts, cum, ids = world.route_ahead(SCAN)
    steer = _pursuit_steering(world, pts, cum)
    v0 = _target_speed(world, pts, cum, ids)
    st = ego.state()
    leader = find_leader(pts, cum, world.agent_states(include_ego=False), st.length)
    gap, v_lead = (leader[0], leader[1]) if leader is not None else (None, 0.0)
    ctrl = control_obstacles(
        world.graph, pts, cum, ids, ego.speed, world.time, st.length, EGO_IDM.b_comf, mem["stop_cleared"]
    )
    if ctrl is not None:
        cgap, w, kind = ctrl
        # aim the front bumper just short of the stop line
        cgap = cgap + 0.5 * st.length - 1.0
        if kind == "stop" and ego.speed <= 0.05 and cgap < 4.0:
            mem["stop_timer"] += world.dt
            if mem["stop_timer"] >= 1.0:
                mem["stop_cleared"].add(w)
                mem["stop_timer"] = 0.0
        if gap is None or cgap < gap:
            gap, v_lead = cgap, 0.0
    acc = idm_accel(ego.speed, v0, EGO_IDM, gap, v_lead)
    if gap is not None and gap < 0.5 and ego.speed < 0.5:
        acc = -EGO_IDM.b_emergency
    # hard speed envelope: current limit plus braking curves to lower limits ahead
    acc = min(acc, (_speed_envelope(world, cum, ids) - ego.speed) / world.dt)
    return ActionCommand(acc / ego.params.a_max, steer).clamped()
