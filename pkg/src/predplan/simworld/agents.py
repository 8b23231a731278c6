"""Agent state records and the ego kinematic bicycle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

VEHICLE = "vehicle"
PEDESTRIAN = "pedestrian"


@dataclass
class AgentState:
    id: int
    cls: str
    x: float
    y: float
    heading: float
    speed: float
    length: float
    width: float

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def copy(self) -> "AgentState":
        return AgentState(self.id, self.cls, self.x, self.y, self.heading, self.speed, self.length, self.width)


@dataclass
class ActionCommand:
    """Normalized acceleration and steering, each clamped to [-1, 1].

    Positive steering turns right (clockwise), matching the policy's
    left = -1 / right = +1 convention.
    """

    acceleration: float
    steering: float

    def clamped(self) -> "ActionCommand":
        return ActionCommand(
            float(np.clip(self.acceleration, -1.0, 1.0)), float(np.clip(self.steering, -1.0, 1.0))
        )


@dataclass
class BicycleParams:
    wheelbase: float = 2.7
    rear_to_cg: float = 1.35
    a_max: float = 3.0
    steer_max: float = np.deg2rad(35.0)
    length: float = 4.5
    width: float = 2.0
    v_cap: float | None = None  # top speed; None leaves speed unbounded above


class EgoVehicle:
    """Kinematic bicycle referenced at the center of gravity."""

    def __init__(self, x, y, heading, speed=0.0, params: BicycleParams | None = None):
        self.params = params or BicycleParams()
        self.x, self.y, self.heading, self.speed = float(x), float(y), float(heading), float(speed)
        self.throttle = 0.0
        self.brake = 0.0
        self.steer = 0.0
        self.slip = 0.0

    def apply(self, cmd: ActionCommand, dt: float) -> None:
        cmd = cmd.clamped()
        p = self.params
        acc = cmd.acceleration
        self.throttle = acc if acc > 0 else 0.0
        self.brake = -acc if acc < 0 else 0.0
        self.steer = cmd.steering
        delta = -p.steer_max * cmd.steering
        self.slip = float(np.arctan(p.rear_to_cg / p.wheelbase * np.tan(delta)))
        v = self.speed
        if v != 0.0:
            self.x += v * np.cos(self.heading + self.slip) * dt
            self.y += v * np.sin(self.heading + self.slip) * dt
            self.heading = float((self.heading + v / p.rear_to_cg * np.sin(self.slip) * dt + np.pi) % (2 * np.pi) - np.pi)
        self.speed = max(0.0, v + p.a_max * acc * dt)
        if p.v_cap is not None:
            self.speed = min(self.speed, p.v_cap)

    def velocity_body(self) -> np.ndarray:
        return np.array([self.speed * np.cos(self.slip), self.speed * np.sin(self.slip)])

    def state(self) -> AgentState:
        p = self.params
        return AgentState(0, VEHICLE, self.x, self.y, self.heading, self.speed, p.length, p.width)
