"""
PATH: src/multicam_fusion/core.py
PURPOSE: Geometry and measurement value types shared by every module.

WHY: Detections, tracks and homographies cross module (and thread) boundaries
     constantly. Keeping them as frozen dataclasses with invariants checked at
     construction means downstream code never re-validates.

FLOW:
┌──────────────────────┐   ┌──────────────────────────┐   ┌──────────────────────────┐
│ Detection (BBox)     │──▶│ centroid() → Point2       │──▶│ project(·, Homography)    │
└──────────────────────┘   └──────────────────────────┘   └──────────────────────────┘

DEPENDENCIES:
- numpy (determinant / inverse of the 3×3 map)
"""

from __future__ import annotations

import dataclasses
import math
from collections.abc import Iterator, Sequence

import numpy as np

from multicam_fusion.errors import DegenerateProjectionError, SingularHomographyError

SINGULAR_TOLERANCE = 1e-12
HORIZON_TOLERANCE = 1e-12


@dataclasses.dataclass(frozen=True)
class Point2:
    """A point in the image plane (pixels) or on the base plane."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"Point2 coordinates must be finite, got ({self.x}, {self.y})")

    def distance_to(self, other: Point2) -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def squared_distance_to(self, other: Point2) -> float:
        dx = self.x - other.x
        dy = self.y - other.y
        return dx * dx + dy * dy


@dataclasses.dataclass(frozen=True)
class BBox:
    """Detector output region: centroid plus extents, all in pixels."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.cx, self.cy, self.w, self.h)):
            raise ValueError("BBox fields must be finite")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"BBox extents must be positive, got w={self.w}, h={self.h}")


@dataclasses.dataclass(frozen=True)
class Detection:
    """One per-frame bounding-box measurement from one camera."""

    frame: int
    camera: str
    bbox: BBox
    confidence: float | None = None
    track: int | None = None  # annotation id from the source file, not used for association

    def __post_init__(self) -> None:
        if self.frame < 0:
            raise ValueError(f"Detection frame must be >= 0, got {self.frame}")
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"Detection confidence must be in [0, 1], got {self.confidence}")


@dataclasses.dataclass(frozen=True)
class TrackPoint:
    """One filtered trajectory sample."""

    frame: int
    point: Point2
    updated: bool
    spread: float
    misses: int = 0
    measurement: Point2 | None = None  # centroid consumed by the update; None when predict-only

    def __post_init__(self) -> None:
        if self.spread < 0:
            raise ValueError(f"TrackPoint spread must be >= 0, got {self.spread}")
        if self.misses < 0:
            raise ValueError(f"TrackPoint misses must be >= 0, got {self.misses}")


@dataclasses.dataclass(frozen=True)
class Track:
    """Frame-ordered estimated centroids of one target seen by one camera."""

    id: int
    camera: str
    points: tuple[TrackPoint, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", tuple(self.points))
        for prev, cur in zip(self.points, self.points[1:]):
            if cur.frame != prev.frame + 1:
                raise ValueError(
                    f"Track {self.id} ({self.camera}): frames must be consecutive, "
                    f"got {prev.frame} then {cur.frame}"
                )

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[TrackPoint]:
        return iter(self.points)

    @property
    def first_frame(self) -> int | None:
        return self.points[0].frame if self.points else None

    @property
    def last_frame(self) -> int | None:
        return self.points[-1].frame if self.points else None

    def at(self, frame: int) -> TrackPoint | None:
        """Return the point at ``frame`` or None outside the track's lifetime."""
        if not self.points or not self.points[0].frame <= frame <= self.points[-1].frame:
            return None
        return self.points[frame - self.points[0].frame]


@dataclasses.dataclass(frozen=True)
class Homography:
    """3×3 projective map, row-major. Invertible by construction."""

    m: tuple[tuple[float, float, float], tuple[float, float, float], tuple[float, float, float]]

    def __post_init__(self) -> None:
        rows = tuple(tuple(float(v) for v in row) for row in self.m)
        if len(rows) != 3 or any(len(row) != 3 for row in rows):
            raise ValueError("Homography must be 3×3")
        if not all(math.isfinite(v) for row in rows for v in row):
            raise ValueError("Homography entries must be finite")
        object.__setattr__(self, "m", rows)
        det = float(np.linalg.det(self.as_array()))
        if abs(det) <= SINGULAR_TOLERANCE:
            raise SingularHomographyError(f"homography is singular (|det| = {abs(det):.3e})")

    @classmethod
    def identity(cls) -> Homography:
        return cls(((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)))

    @classmethod
    def from_flat(cls, values: Sequence[float]) -> Homography:
        """Build from 9 row-major numbers, the run-config representation."""
        if len(values) != 9:
            raise ValueError(f"homography needs 9 values, got {len(values)}")
        v = [float(x) for x in values]
        return cls((tuple(v[0:3]), tuple(v[3:6]), tuple(v[6:9])))

    def as_array(self) -> np.ndarray:
        return np.array(self.m, dtype=float)

    def flat(self) -> list[float]:
        return [v for row in self.m for v in row]

    def inverse(self) -> Homography:
        return Homography(tuple(tuple(row) for row in np.linalg.inv(self.as_array()).tolist()))


def centroid(b: BBox) -> Point2:
    """Tracked point of a detection box."""
    return Point2(b.cx, b.cy)


def project(p: Point2, h: Homography) -> Point2:
    """Map ``p`` through ``h`` with homogeneous division."""
    (m00, m01, m02), (m10, m11, m12), (m20, m21, m22) = h.m
    w = m20 * p.x + m21 * p.y + m22
    if abs(w) < HORIZON_TOLERANCE:
        raise DegenerateProjectionError(f"point ({p.x}, {p.y}) lies on the homography horizon (w = {w:.3e})")
    return Point2((m00 * p.x + m01 * p.y + m02) / w, (m10 * p.x + m11 * p.y + m12) / w)


def validate_homography(m: Sequence[Sequence[float]]) -> Homography:
    """Return a Homography for ``m`` or raise SingularHomographyError."""
    arr = np.asarray(m, dtype=float)
    if arr.shape != (3, 3):
        raise ValueError(f"homography must be 3×3, got shape {arr.shape}")
    return Homography(tuple(tuple(row) for row in arr.tolist()))
