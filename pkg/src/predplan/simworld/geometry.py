"""Planar geometry helpers: angles, polylines, oriented rectangles."""

from __future__ import annotations

import numpy as np


def wrap_angle(a):
    """Wrap to [-pi, pi)."""
    return (np.asarray(a) + np.pi) % (2.0 * np.pi) - np.pi


def heading_error(a, b):
    """Absolute heading difference wrapped to [0, pi]."""
    return np.abs(wrap_angle(np.asarray(a) - np.asarray(b)))


def resample_polyline(points: np.ndarray, spacing: float) -> np.ndarray:
    """Evenly spaced points along ``points`` (endpoints kept)."""
    points = np.asarray(points, dtype=np.float64)
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    n = max(int(np.ceil(total / spacing)), 1)
    t = np.linspace(0.0, total, n + 1)
    return np.stack([np.interp(t, s, points[:, 0]), np.interp(t, s, points[:, 1])], axis=1)


def bezier(p0, p1, p2, p3, n: int = 64) -> np.ndarray:
    t = np.linspace(0.0, 1.0, n)[:, None]
    return (
        (1 - t) ** 3 * p0
        + 3 * (1 - t) ** 2 * t * p1
        + 3 * (1 - t) * t**2 * p2
        + t**3 * p3
    )


def polyline_headings(points: np.ndarray) -> np.ndarray:
    d = np.diff(points, axis=0)
    h = np.arctan2(d[:, 1], d[:, 0])
    return np.concatenate([h, h[-1:]])


def point_segment_distance(p, a, b):
    """Distance from points ``p`` (..., 2) to segments ``a``-``b`` (broadcast).

    Returns (distance, t) where t in [0, 1] is the projection parameter.
    """
    p, a, b = np.asarray(p), np.asarray(a), np.asarray(b)
    ab = b - a
    denom = np.sum(ab * ab, axis=-1)
    safe = np.where(denom > 0, denom, 1.0)
    t = np.clip(np.sum((p - a) * ab, axis=-1) / safe, 0.0, 1.0)
    t = np.where(denom > 0, t, 0.0)
    proj = a + t[..., None] * ab
    return np.linalg.norm(p - proj, axis=-1), t


def rect_corners(x, y, heading, length, width) -> np.ndarray:
    """Corners (4, 2) of an oriented rectangle centered at (x, y)."""
    c, s = np.cos(heading), np.sin(heading)
    hl, hw = 0.5 * length, 0.5 * width
    local = np.array([[hl, hw], [hl, -hw], [-hl, -hw], [-hl, hw]])
    R = np.array([[c, -s], [s, c]])
    return local @ R.T + np.array([x, y])


def rects_overlap(a: np.ndarray, b: np.ndarray) -> bool:
    """Separating-axis test for two convex quadrilaterals given as corners.

    Touching edges count as overlap.
    """
    for poly in (a, b):
        for i in range(4):
            edge = poly[(i + 1) % 4] - poly[i]
            axis = np.array([-edge[1], edge[0]])
            pa = a @ axis
            pb = b @ axis
            if pa.max() < pb.min() or pb.max() < pa.min():
                return False
    return True
