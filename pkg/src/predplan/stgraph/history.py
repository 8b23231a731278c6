"""Agent kinematic histories sampled at the predictor's 0.4 s cadence."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError

PAST = 8
FUTURE = 7
DELTA = 0.4
SIM_STRIDE = 4  # simulator steps per predictor sample


@dataclass
class AgentHistory:
    id: int
    cls: str
    positions: np.ndarray  # (8, 2) m
    velocities: np.ndarray  # (8, 2) m/s
    accelerations: np.ndarray  # (8, 2) m/s^2
    dt: float = DELTA

    def __post_init__(self):
        for name in ("positions", "velocities", "accelerations"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (PAST, 2):
                raise ShapeError(f"AgentHistory.{name}: expected ({PAST}, 2), got {arr.shape}")
            setattr(self, name, arr)

    @classmethod
    def from_positions(cls, agent_id: int, agent_cls: str, positions, dt: float = DELTA) -> "AgentHistory":
        """Derive velocities and accelerations by finite differences of ``positions``."""
        pos = np.asarray(positions, dtype=np.float64)
        if pos.shape != (PAST, 2):
            raise ShapeError(f"expected {PAST} positions, got shape {pos.shape}")
        vel = np.gradient(pos, dt, axis=0)
        acc = np.gradient(vel, dt, axis=0)
        return cls(agent_id, agent_cls, pos, vel, acc, dt)

    @property
    def last(self) -> np.ndarray:
        return self.positions[-1]

    @property
    def state(self) -> np.ndarray:
        """(8, 6) rows of [x, y, vx, vy, ax, ay]."""
        return np.concatenate([self.positions, self.velocities, self.accelerations], axis=1)

    def heading(self) -> float:
        """Direction of travel at the last sample (0 when effectively stationary)."""
        v = self.velocities[-1]
        if np.hypot(*v) > 0.5:
            return float(np.arctan2(v[1], v[0]))
        d = self.positions[-1] - self.positions[0]
        if np.hypot(*d) > 0.5:
            return float(np.arctan2(d[1], d[0]))
        return 0.0


def future_velocities(last_position, future_positions, dt: float = DELTA) -> np.ndarray:
    """Backward differences so that integrating them reproduces the positions."""
    pts = np.vstack([np.asarray(last_position, dtype=np.float64)[None, :], np.asarray(future_positions, dtype=np.float64)])
    return np.diff(pts, axis=0) / dt


def histories_from_snapshots(snapshots, stride: int = SIM_STRIDE, cls_filter=None) -> list:
    """Histories for every agent present in the latest snapshot.

    ``snapshots`` is a sequence of simulator snapshots (oldest first), each
    with an ``agents`` mapping of id to state. Samples are taken every
    ``stride`` snapshots counting back from the newest; agents seen for a
    shorter time are padded with their earliest sample (stationary).
    """
    snaps = list(snapshots)
    if not snaps:
        return []
    picks = [len(snaps) - 1 - stride * k for k in range(PAST)][::-1]
    latest = snaps[-1].agents
    out = []
    for aid, st in latest.items():
        if cls_filter is not None and st.cls != cls_filter:
            continue
        pts = []
        for idx in picks:
            a = snaps[idx].agents.get(aid) if idx >= 0 else None
            pts.append(None if a is None else (a.x, a.y))
        first = next(p for p in pts if p is not None)
        # pad forward gaps with the earliest known position
        filled, cur = [], first
        for p in pts:
            cur = p if p is not None else cur
            filled.append(cur)
        out.append(AgentHistory.from_positions(aid, st.cls, np.array(filled)))
    return out
