"""Per-episode benchmark metrics, penalty factors and the driving score."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from ..simworld import TerminationKind

DEFAULT_PENALTIES = {
    "vehicle_crash": 0.60,
    "walker_crash": 0.50,
    "layout_crash": 0.65,
    "red_light": 0.70,
    "stop_sign": 0.80,
}
MIN_KM = 0.1  # per-km rates use at least this much driven distance


def penalty_factor(infractions: dict, multipliers: dict | None = None) -> float:
    """Product of multiplier ** count over the infraction multiset."""
    table = DEFAULT_PENALTIES if multipliers is None else multipliers
    p = 1.0
    for name, count in infractions.items():
        if count < 0:
            raise ValueError(f"infraction count for {name!r} must be nonnegative, got {count}")
        if count:
            if name not in table:
                raise KeyError(f"no penalty multiplier configured for {name!r}")
            p *= float(table[name]) ** int(count)
    return float(np.clip(p, 0.0, 1.0))


def driving_score(route_completion: float, penalty: float) -> float:
    return float(np.clip(route_completion, 0.0, 1.0) * np.clip(penalty, 0.0, 1.0))


@dataclass
class EpisodeMetrics:
    end_reach: int
    success: int
    route_completion: float
    penalty_factor: float
    driving_score: float
    layout_crash_per_km: float
    walker_crash_per_km: float
    vehicle_crash_per_km: float
    vehicle_halt_per_km: float
    lights_met: int
    lights_passed: int
    outside_lane_pct: float = 0.0
    route_deviations: int = 0
    episode_return: float = 0.0

    def __post_init__(self):
        if self.success and not self.end_reach:
            raise ValueError("a successful episode must reach the end of its route")
        if self.lights_passed > self.lights_met:
            raise ValueError(f"lights passed {self.lights_passed} exceeds lights met {self.lights_met}")

    @classmethod
    def field_names(cls) -> list:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> dict:
        return asdict(self)


def infractions_of(counters) -> dict:
    return {
        "vehicle_crash": counters.vehicle_collisions,
        "walker_crash": counters.pedestrian_collisions,
        "layout_crash": counters.layout_collisions,
        "red_light": counters.red_lights,
        "stop_sign": counters.stop_signs,
    }


@dataclass
class EpisodeResult:
    """Metrics of one episode plus how it ended."""

    metrics: EpisodeMetrics
    termination: str


def episode_result(world, multipliers: dict | None = None) -> EpisodeResult:
    kind = world.kind or TerminationKind.MAX_STEPS
    return EpisodeResult(episode_metrics(world, multipliers), kind.value)


def episode_metrics(world, multipliers: dict | None = None) -> EpisodeMetrics:
    """Metrics of a finished (or abandoned) episode."""
    c = world.counters
    infr = infractions_of(c)
    pen = penalty_factor(infr, multipliers)
    completion = 1.0 if world.end_reached else world.completion
    km = max(c.distance / 1000.0, MIN_KM)
    end = int(world.end_reached)
    clean = sum(infr.values()) == 0
    return EpisodeMetrics(
        end_reach=end,
        success=int(end and clean),
        route_completion=completion,
        penalty_factor=pen,
        driving_score=driving_score(completion, pen),
        layout_crash_per_km=c.layout_collisions / km,
        walker_crash_per_km=c.pedestrian_collisions / km,
        vehicle_crash_per_km=c.vehicle_collisions / km,
        vehicle_halt_per_km=c.vehicle_halts / km,
        lights_met=c.lights_met,
        lights_passed=c.lights_met - c.lights_run,
        outside_lane_pct=100.0 * c.outside_lane_steps / max(c.steps, 1),
        route_deviations=c.route_deviations,
        episode_return=c.return_,
    )
