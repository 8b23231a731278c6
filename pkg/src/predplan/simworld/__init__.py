"""Deterministic 2D driving microsimulator."""

from .agents import PEDESTRIAN, VEHICLE, ActionCommand, AgentState, BicycleParams, EgoVehicle
from .autopilot import roaming_policy
from .geometry import heading_error, rect_corners, rects_overlap, wrap_angle
from .routing import Route, plan_route, route_polyline
from .town import PRESETS, SPEED_TABLE, LaneGraph, build_town
from .traffic import IDMParams, idm_accel, spawn_background
from .world import (
    EpisodeConfig,
    RewardBreakdown,
    StepResult,
    TerminationKind,
    World,
    make_world,
    reward_components,
)

__all__ = [
    "PEDESTRIAN",
    "VEHICLE",
    "ActionCommand",
    "AgentState",
    "BicycleParams",
    "EgoVehicle",
    "roaming_policy",
    "heading_error",
    "rect_corners",
    "rects_overlap",
    "wrap_angle",
    "Route",
    "plan_route",
    "route_polyline",
    "PRESETS",
    "SPEED_TABLE",
    "LaneGraph",
    "build_town",
    "IDMParams",
    "idm_accel",
    "spawn_background",
    "EpisodeConfig",
    "RewardBreakdown",
    "StepResult",
    "TerminationKind",
    "World",
    "make_world",
    "reward_components",
]
