"""
PATH: src/multicam_fusion/scenario.py
PURPOSE: Synthetic multi-camera scene generator: base-plane ground truth, per-camera
         projections, Gaussian centroid noise, random and windowed misses.

WHY: Real two-camera footage with ground truth is private. A seeded simulator is
     the oracle every statistical test and benchmark runs against, so its
     seed-to-stream mapping is part of the contract:

     SEED MAPPING (stable across releases):
       children = numpy.random.SeedSequence(seed).spawn(len(cameras))
       camera i (config order) draws from default_rng(children[i]) (PCG64):
         1. standard_normal, shape (frames, 2)  → noise = sigma · draw
         2. random, shape (frames,)              → frame missed if draw < p
       Both draws always happen, whatever sigma and p are.

FLOW:
┌──────────────────────┐   ┌──────────────────────────┐   ┌──────────────────────────┐
│ iterate F·x truth    │──▶│ project per camera + noise│──▶│ drop missed / occluded    │
└──────────────────────┘   └──────────────────────────┘   └──────────────────────────┘

DEPENDENCIES:
- numpy
"""

from __future__ import annotations

import dataclasses
import logging
from collections.abc import Sequence

import numpy as np

from multicam_fusion.core import BBox, Detection, Homography, Point2, project
from multicam_fusion.estimation import MotionKind, MotionModel, transition_matrix

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class TruthSpec:
    """Initial state of the simulated person on the base plane."""

    model: MotionKind = MotionKind.CONSTANT_VELOCITY
    position: tuple[float, float] = (0.0, 0.0)
    velocity: tuple[float, float] = (1.0, 0.0)
    acceleration: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "model", MotionKind(self.model))

    def initial_state(self) -> np.ndarray:
        state = [*self.position, *self.velocity]
        if self.model is MotionKind.CONSTANT_ACCELERATION:
            state += [*self.acceleration]
        return np.array(state, dtype=float)


@dataclasses.dataclass(frozen=True)
class MissSpec:
    """Independent per-frame miss probability and inclusive occlusion windows."""

    probability: float = 0.0
    windows: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        if not 0.0 <= self.probability < 1.0:
            raise ValueError(f"miss probability must be in [0, 1), got {self.probability}")
        windows = tuple((int(a), int(b)) for a, b in self.windows)
        for start, end in windows:
            if start > end:
                raise ValueError(f"occlusion window [{start}, {end}] is reversed")
        object.__setattr__(self, "windows", windows)

    def occluded(self, frame: int) -> bool:
        return any(start <= frame <= end for start, end in self.windows)


@dataclasses.dataclass(frozen=True)
class CameraSpec:
    """One simulated camera. ``homography`` maps base plane → image plane."""

    id: str
    homography: Homography = dataclasses.field(default_factory=Homography.identity)
    noise_sigma: float = 0.0
    miss: MissSpec = MissSpec()

    def __post_init__(self) -> None:
        if self.noise_sigma < 0:
            raise ValueError(f"camera '{self.id}': noise_sigma must be >= 0, got {self.noise_sigma}")


@dataclasses.dataclass(frozen=True)
class ScenarioConfig:
    frames: int
    cameras: tuple[CameraSpec, ...]
    truth: TruthSpec = TruthSpec()
    seed: int = 0
    name: str = "custom"
    box: tuple[float, float] = (40.0, 100.0)  # emitted w, h; only centroids are consumed

    def __post_init__(self) -> None:
        object.__setattr__(self, "cameras", tuple(self.cameras))
        if self.frames < 2:
            raise ValueError(f"scenario needs at least 2 frames, got {self.frames}")
        if not self.cameras:
            raise ValueError("scenario needs at least one camera")
        ids = [c.id for c in self.cameras]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate camera ids in {ids}")
        for cam in self.cameras:
            for start, end in cam.miss.windows:
                if start < 0 or end >= self.frames:
                    raise ValueError(
                        f"camera '{cam.id}': occlusion window [{start}, {end}] outside [0, {self.frames})"
                    )

    def camera(self, camera_id: str) -> CameraSpec:
        return next(c for c in self.cameras if c.id == camera_id)


@dataclasses.dataclass(frozen=True)
class ScenarioOutput:
    gt_base: dict[int, Point2]
    gt_per_camera: dict[str, dict[int, Point2]]
    detections: dict[str, list[Detection]]
    config: ScenarioConfig

    def to_base(self) -> dict[str, Homography]:
        """Image → base-plane maps, the form the pipeline consumes."""
        return {c.id: c.homography.inverse() for c in self.config.cameras}


def truth_trajectory(truth: TruthSpec, frames: int) -> dict[int, Point2]:
    """Iterate the motion model's transition matrix exactly ``frames`` times."""
    F = transition_matrix(MotionModel(kind=truth.model))
    state = truth.initial_state()
    out: dict[int, Point2] = {}
    for frame in range(frames):
        out[frame] = Point2(float(state[0]), float(state[1]))
        state = F @ state
    return out


def _camera_stream(
    cam: CameraSpec,
    gt_image: dict[int, Point2],
    rng: np.random.Generator,
    frames: int,
    box: Sequence[float],
) -> list[Detection]:
    noise = cam.noise_sigma * rng.standard_normal(size=(frames, 2))
    draws = rng.random(frames)
    detections: list[Detection] = []
    for frame in range(frames):
        if draws[frame] < cam.miss.probability or cam.miss.occluded(frame):
            continue
        p = gt_image[frame]
        detections.append(
            Detection(
                frame=frame,
                camera=cam.id,
                bbox=BBox(p.x + float(noise[frame, 0]), p.y + float(noise[frame, 1]), box[0], box[1]),
            )
        )
    return detections


def simulate(cfg: ScenarioConfig) -> ScenarioOutput:
    """Generate ground truth and per-camera detections. Deterministic for a fixed seed."""
    gt_base = truth_trajectory(cfg.truth, cfg.frames)
    children = np.random.SeedSequence(cfg.seed).spawn(len(cfg.cameras))

    gt_per_camera: dict[str, dict[int, Point2]] = {}
    detections: dict[str, list[Detection]] = {}
    for cam, child in zip(cfg.cameras, children):
        gt_image = {f: project(p, cam.homography) for f, p in gt_base.items()}
        gt_per_camera[cam.id] = gt_image
        detections[cam.id] = _camera_stream(cam, gt_image, np.random.default_rng(child), cfg.frames, cfg.box)
        logger.info(
            "scenario %s: camera %s emitted %d/%d detections",
            cfg.name,
            cam.id,
            len(detections[cam.id]),
            cfg.frames,
        )

    return ScenarioOutput(gt_base=gt_base, gt_per_camera=gt_per_camera, detections=detections, config=cfg)
