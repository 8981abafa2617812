"""
PATH: src/multicam_fusion/estimation.py
PURPOSE: Constant-velocity / constant-acceleration motion models and the linear
         Kalman predict/correct cycle, including predict-only stepping in gaps.

WHY: Every stage downstream (tracking, fusion, evaluation) consumes filtered
     centroids. Keeping the filter as pure old-state → new-state functions over
     an immutable FilterState lets distinct tracks run on separate threads and
     makes each step reproducible bit for bit.

FLOW:
┌──────────────────────┐   ┌──────────────────────────┐   ┌──────────────────────────┐
│ init_filter(det)     │──▶│ predict: x=Fx, P=FPFᵀ+qI  │──▶│ update(z) or miss()       │
└──────────────────────┘   └──────────────────────────┘   └──────────────────────────┘

DEPENDENCIES:
- numpy
- filterpy (functional predict/update)
"""

from __future__ import annotations

import dataclasses
import enum
import logging

import numpy as np
from filterpy import kalman

from multicam_fusion.core import Detection, Point2, centroid
from multicam_fusion.errors import SingularInnovationError

logger = logging.getLogger(__name__)

INNOVATION_TOLERANCE = 1e-12


class MotionKind(str, enum.Enum):
    CONSTANT_VELOCITY = "cv"
    CONSTANT_ACCELERATION = "ca"


@dataclasses.dataclass(frozen=True)
class MotionModel:
    """Motion model and its per-frame time step."""

    kind: MotionKind = MotionKind.CONSTANT_VELOCITY
    dt: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", MotionKind(self.kind))
        if not self.dt > 0:
            raise ValueError(f"MotionModel dt must be > 0, got {self.dt}")

    @property
    def dim(self) -> int:
        return 4 if self.kind is MotionKind.CONSTANT_VELOCITY else 6


@dataclasses.dataclass(frozen=True)
class NoiseConfig:
    """Scales of the identity process, measurement and initial covariances."""

    q_scale: float = 1.0
    r_scale: float = 1.0
    p0_scale: float = 1.0

    def __post_init__(self) -> None:
        for name in ("q_scale", "r_scale", "p0_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"NoiseConfig.{name} must be > 0, got {getattr(self, name)}")


@dataclasses.dataclass(frozen=True, eq=False)
class FilterState:
    """
    Kalman state of one track.

    State order is [x, y, vx, vy] for constant velocity and
    [x, y, vx, vy, ax, ay] for constant acceleration. Arrays are read-only.
    """

    x: np.ndarray
    P: np.ndarray
    model: MotionModel
    noise: NoiseConfig = NoiseConfig()
    misses: int = 0
    frame: int = 0

    def __post_init__(self) -> None:
        x = np.array(self.x, dtype=float).reshape(-1)
        P = np.array(self.P, dtype=float)
        n = self.model.dim
        if x.shape != (n,) or P.shape != (n, n):
            raise ValueError(f"state dimension mismatch for {self.model.kind.value}: x{x.shape}, P{P.shape}")
        if self.misses < 0:
            raise ValueError(f"misses must be >= 0, got {self.misses}")
        x.setflags(write=False)
        P.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "P", P)


def transition_matrix(model: MotionModel) -> np.ndarray:
    """State transition F; the motion equations r = r0 + v·t (+ a·t²/2)."""
    dt = model.dt
    if model.kind is MotionKind.CONSTANT_VELOCITY:
        return np.array(
            [
                [1.0, 0.0, dt, 0.0],
                [0.0, 1.0, 0.0, dt],
                [0.0, 0.0, 1.0, 0.0],
                [0.0, 0.0, 0.0, 1.0],
            ]
        )
    half = 0.5 * dt * dt
    return np.array(
        [
            [1.0, 0.0, dt, 0.0, half, 0.0],
            [0.0, 1.0, 0.0, dt, 0.0, half],
            [0.0, 0.0, 1.0, 0.0, dt, 0.0],
            [0.0, 0.0, 0.0, 1.0, 0.0, dt],
            [0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
        ]
    )


def observation_matrix(model: MotionModel) -> np.ndarray:
    """Observation H extracting (x, y) from the state."""
    H = np.zeros((2, model.dim))
    H[0, 0] = 1.0
    H[1, 1] = 1.0
    return H


def _symmetrize(P: np.ndarray) -> np.ndarray:
    return (P + P.T) / 2.0


def init_filter(d: Detection, model: MotionModel, noise: NoiseConfig | None = None) -> FilterState:
    """Start a filter at the detection centroid with zero derivatives."""
    noise = noise or NoiseConfig()
    c = centroid(d.bbox)
    x = np.zeros(model.dim)
    x[0] = c.x
    x[1] = c.y
    return FilterState(
        x=x,
        P=noise.p0_scale * np.eye(model.dim),
        model=model,
        noise=noise,
        misses=0,
        frame=d.frame,
    )


def position(s: FilterState) -> Point2:
    return Point2(float(s.x[0]), float(s.x[1]))


def spread(s: FilterState) -> float:
    """Trace of the position block of P, clamped at zero."""
    return max(0.0, float(s.P[0, 0] + s.P[1, 1]))


def predict(s: FilterState) -> FilterState:
    """Advance one frame through the motion model. Does not touch ``misses``."""
    # filterpy works on column vectors
    x, P = kalman.predict(
        s.x.reshape(-1, 1), s.P, F=transition_matrix(s.model), Q=s.noise.q_scale * np.eye(s.model.dim)
    )
    return dataclasses.replace(s, x=x.ravel(), P=_symmetrize(P), frame=s.frame + 1)


def _check_innovation(S: np.ndarray, frame: int) -> None:
    # scale-free: smallest eigenvalue against the largest
    try:
        eigenvalues = np.abs(np.linalg.eigvalsh(S))
    except np.linalg.LinAlgError as e:
        raise SingularInnovationError(f"innovation covariance is singular at frame {frame}") from e
    largest = float(eigenvalues.max())
    if not np.all(np.isfinite(eigenvalues)) or largest == 0.0 or eigenvalues.min() <= INNOVATION_TOLERANCE * largest:
        raise SingularInnovationError(f"innovation covariance is singular at frame {frame}")


def update(s: FilterState, z: Point2) -> FilterState:
    """Correct a predicted state with measurement ``z``; resets ``misses``."""
    H = observation_matrix(s.model)
    R = s.noise.r_scale * np.eye(2)
    _check_innovation(H @ s.P @ H.T + R, s.frame)
    try:
        x, P = kalman.update(s.x.reshape(-1, 1), s.P, np.array([[z.x], [z.y]]), R, H)
    except np.linalg.LinAlgError as e:
        raise SingularInnovationError(f"innovation covariance is singular at frame {s.frame}") from e
    return dataclasses.replace(s, x=x.ravel(), P=_symmetrize(P), misses=0)


def miss(s: FilterState) -> FilterState:
    """Predict-only step used when no measurement arrives."""
    predicted = predict(s)
    return dataclasses.replace(predicted, misses=s.misses + 1)


def step(s: FilterState, z: Point2 | None) -> FilterState:
    """One frame: predict then update when ``z`` is given, predict only otherwise."""
    if z is None:
        return miss(s)
    return update(predict(s), z)
