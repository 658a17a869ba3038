"""Pure geometric primitives over binary masks.

Masks are 2-D boolean arrays indexed [row, col]; points are (x, y) with
x = column and y = row.  Everything here is deterministic and side-effect
free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, EmptyMask


@dataclass(frozen=True)
class RadiusProfile:
    """Boundary radii about the mask centroid, bucketed into angular sectors.

    Sector i spans [i*360/n, (i+1)*360/n) degrees.  A sector with no
    boundary samples is absent (None), never zero-filled, so occlusions
    cannot fake a short radius.
    """

    centroid: tuple[float, float]
    samples: list[tuple[float, float]]  # (angle_degrees in [0,360), radius_px)
    sector_means: list[float | None]

    @property
    def present_count(self) -> int:
        return sum(1 for m in self.sector_means if m is not None)

    def max_sector(self) -> tuple[int, float]:
        """Index and mean of the largest present sector."""
        best = max(
            ((i, m) for i, m in enumerate(self.sector_means) if m is not None),
            key=lambda im: im[1],
        )
        return best

    def global_mean_radius(self) -> float:
        return float(np.mean([r for _, r in self.samples]))


def centroid_area(mask: np.ndarray) -> tuple[tuple[float, float] | None, int]:
    """Centroid (x, y) and set-pixel count; empty mask gives (None, 0)."""
    m = np.asarray(mask, dtype=bool)
    ys, xs = np.nonzero(m)
    if xs.size == 0:
        return None, 0
    return (float(xs.mean()), float(ys.mean())), int(xs.size)


def boundary_pixels(mask: np.ndarray) -> np.ndarray:
    """Set pixels with an unset 4-neighbor or lying on the image border.

    Returns an (n, 2) int array of (x, y) in row-major scan order.
    Raises EmptyMask on an all-zero mask.
    """
    m = np.asarray(mask, dtype=bool)
    if not m.any():
        raise EmptyMask("boundary_pixels: mask has no set pixels")
    padded = np.pad(m, 1, constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    ys, xs = np.nonzero(m & ~interior)
    return np.column_stack([xs, ys]).astype(np.int64)


def radius_profile(mask: np.ndarray, sectors: int = 12) -> RadiusProfile:
    """Radial profile of the mask boundary about the mask centroid.

    Angles use image coordinates (y grows downward) mapped to [0, 360).
    """
    if sectors < 2:
        raise ValueError(f"sectors must be >= 2, got {sectors}")
    centroid, _area = centroid_area(mask)
    if centroid is None:
        raise EmptyMask("radius_profile: mask has no set pixels")
    cx, cy = centroid

    pts = boundary_pixels(mask)
    dx = pts[:, 0] - cx
    dy = pts[:, 1] - cy
    angles = np.degrees(np.arctan2(dy, dx)) % 360.0
    radii = np.hypot(dx, dy)

    width = 360.0 / sectors
    idx = np.minimum((angles // width).astype(int), sectors - 1)
    means: list[float | None] = []
    for i in range(sectors):
        sel = radii[idx == i]
        means.append(float(sel.mean()) if sel.size else None)

    samples = list(zip(angles.tolist(), radii.tolist()))
    return RadiusProfile(centroid=(cx, cy), samples=samples, sector_means=means)


def bounding_box(points) -> tuple[float, float, float, float]:
    """Tight axis-aligned box (min_x, min_y, max_x, max_y), inclusive."""
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise EmptyInput("bounding_box: no points")
    pts = pts.reshape(-1, 2)
    return (
        float(pts[:, 0].min()),
        float(pts[:, 1].min()),
        float(pts[:, 0].max()),
        float(pts[:, 1].max()),
    )


def box_diagonal(box: tuple[float, float, float, float]) -> float:
    min_x, min_y, max_x, max_y = box
    return math.hypot(max_x - min_x, max_y - min_y)
