"""Ego-centric bird's-eye rasterization at pixel centers.

Pixel (col, row) has its center at integer coordinates. The ego sits on
the anchor pixel with its heading pointing up (decreasing row); columns
grow to the ego's right.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RasterSpec:
    size: int = 192
    resolution: float = 0.25  # m per pixel

    def __post_init__(self):
        if not self.resolution > 0:
            raise ValueError(f"resolution must be positive, got {self.resolution}")
        if self.size <= 0:
            raise ValueError(f"raster size must be positive, got {self.size}")

    @property
    def anchor(self) -> tuple:
        return (self.size // 2, self.size // 2)  # (col, row)

    @property
    def half_extent(self) -> float:
        """Distance (m) from the anchor to the farthest pixel center."""
        return float(np.hypot(self.size / 2, self.size / 2) * self.resolution)


def world_to_pixel(p, ego_pose, resolution: float, size: int):
    """Map world points (..., 2) to (col, row) floats plus an in-frame flag.

    ``ego_pose`` is (x, y, heading). Points whose nearest pixel lies outside
    the image are flagged False rather than raising.
    """
    if not resolution > 0:
        raise ValueError(f"resolution must be positive, got {resolution}")
    p = np.asarray(p, dtype=np.float64)
    x, y, h = ego_pose
    d = p - np.array([x, y])
    c, s = np.cos(h), np.sin(h)
    fwd = d[..., 0] * c + d[..., 1] * s
    left = -d[..., 0] * s + d[..., 1] * c
    ac, ar = size // 2, size // 2
    col = ac - left / resolution
    row = ar - fwd / resolution
    inside = (np.rint(col) >= 0) & (np.rint(col) < size) & (np.rint(row) >= 0) & (np.rint(row) < size)
    return np.stack([col, row], axis=-1), inside


def stamp_segments(mask: np.ndarray, a: np.ndarray, b: np.ndarray, radius) -> None:
    """Set pixels whose center lies within ``radius`` px of any segment a-b (pixel coords)."""
    H, W = mask.shape
    radius = np.broadcast_to(np.asarray(radius, dtype=np.float64), (len(a),))
    for (ax, ay), (bx, by), r in zip(a, b, radius):
        c0 = max(int(np.floor(min(ax, bx) - r)), 0)
        c1 = min(int(np.ceil(max(ax, bx) + r)), W - 1)
        r0 = max(int(np.floor(min(ay, by) - r)), 0)
        r1 = min(int(np.ceil(max(ay, by) + r)), H - 1)
        if c0 > c1 or r0 > r1:
            continue
        cols = np.arange(c0, c1 + 1, dtype=np.float64)[None, :]
        rows = np.arange(r0, r1 + 1, dtype=np.float64)[:, None]
        dx, dy = bx - ax, by - ay
        L2 = dx * dx + dy * dy
        if L2 > 0:
            t = np.clip(((cols - ax) * dx + (rows - ay) * dy) / L2, 0.0, 1.0)
        else:
            t = 0.0
        ex = cols - (ax + t * dx)
        ey = rows - (ay + t * dy)
        mask[r0 : r1 + 1, c0 : c1 + 1] |= ex * ex + ey * ey <= r * r


def stamp_rectangles(mask: np.ndarray, centers: np.ndarray, angles: np.ndarray, half_len: np.ndarray, half_wid: np.ndarray) -> None:
    """Fill oriented rectangles given in pixel units.

    ``angles`` is the rectangle's long-axis direction in pixel space,
    measured from +col toward +row.
    """
    H, W = mask.shape
    for (cx, cy), ang, hl, hw in zip(centers, angles, half_len, half_wid):
        ext = float(np.hypot(hl, hw))
        c0, c1 = max(int(np.floor(cx - ext)), 0), min(int(np.ceil(cx + ext)), W - 1)
        r0, r1 = max(int(np.floor(cy - ext)), 0), min(int(np.ceil(cy + ext)), H - 1)
        if c0 > c1 or r0 > r1:
            continue
        cols = np.arange(c0, c1 + 1, dtype=np.float64)[None, :] - cx
        rows = np.arange(r0, r1 + 1, dtype=np.float64)[:, None] - cy
        ca, sa = np.cos(ang), np.sin(ang)
        u = cols * ca + rows * sa
        v = -cols * sa + rows * ca
        mask[r0 : r1 + 1, c0 : c1 + 1] |= (np.abs(u) <= hl) & (np.abs(v) <= hw)


def stamp_discs(mask: np.ndarray, centers: np.ndarray, radius: float) -> None:
    stamp_segments(mask, centers, centers, radius)


def world_angle_to_pixel(angle, ego_heading):
    """Direction in pixel space (from +col toward +row) of a world heading."""
    # world heading equal to the ego heading points up, i.e. -row
    rel = np.asarray(angle) - ego_heading
    # ego frame: forward=(cos rel), left=(sin rel); col = -left, row = -fwd
    return np.arctan2(-np.cos(rel), -np.sin(rel))
