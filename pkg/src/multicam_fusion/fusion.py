"""
PATH: src/multicam_fusion/fusion.py
PURPOSE: Fuse several cameras' filtered, base-plane-projected tracks into one
         trajectory: weighted sum with miss-threshold switching, winner-take-all
         by health score, and the ground-truth averaging rule.

WHY: One camera alone loses the person under occlusion. Fusion has to keep a
     camera's predict-only points from dragging the result once that camera
     has been blind for a few frames, and has to do it deterministically so
     runs can be compared stage by stage.

FLOW:
┌──────────────────────┐   ┌──────────────────────────┐   ┌──────────────────────────┐
│ build_camera_view    │──▶│ per frame: exclude stale  │──▶│ weighted sum / WTA pick,  │
│ (tracks → samples)   │   │ cameras, score windows    │   │ carry forward if none     │
└──────────────────────┘   └──────────────────────────┘   └──────────────────────────┘

DEPENDENCIES:
- multicam_fusion.core
"""

from __future__ import annotations

import dataclasses
import enum
import logging
import math
from collections.abc import Mapping, Sequence

from multicam_fusion.core import Homography, Point2, Track, TrackPoint, project
from multicam_fusion.errors import NoHealthySourceError, NoSourceError

logger = logging.getLogger(__name__)

WEIGHT_SUM_TOLERANCE = 1e-9
CORRIDOR_FRONT_WEIGHTS = {"corridor": 0.8, "front": 0.2}


class FusionMethod(str, enum.Enum):
    WEIGHTED = "weighted"
    WTA = "wta"


@dataclasses.dataclass(frozen=True)
class FusionConfig:
    """Per-camera weights plus the exclusion and scoring windows."""

    weights: dict[str, float] = dataclasses.field(default_factory=lambda: dict(CORRIDOR_FRONT_WEIGHTS))
    miss_threshold: int = 3
    score_window: int = 10
    switching: bool = True  # False keeps stale cameras in the weighted sum

    def __post_init__(self) -> None:
        if not self.weights:
            raise ValueError("fusion weights must name at least one camera")
        for camera, w in self.weights.items():
            if not 0.0 <= w <= 1.0:
                raise ValueError(f"weight for camera '{camera}' must be in [0, 1], got {w}")
        total = math.fsum(self.weights.values())
        if abs(total - 1.0) > WEIGHT_SUM_TOLERANCE:
            raise ValueError(f"fusion weights must sum to 1, got {total}")
        if self.miss_threshold < 1:
            raise ValueError(f"miss_threshold must be >= 1, got {self.miss_threshold}")
        if self.score_window < 1:
            raise ValueError(f"score_window must be >= 1, got {self.score_window}")


@dataclasses.dataclass(frozen=True)
class CameraSample:
    """One camera's filtered base-plane point for one frame."""

    camera: str
    point: Point2
    updated: bool
    misses: int = 0
    spread: float = 0.0

    def __post_init__(self) -> None:
        if self.misses < 0 or self.spread < 0:
            raise ValueError(f"CameraSample misses and spread must be >= 0 ({self.camera})")


@dataclasses.dataclass(frozen=True)
class CameraScore:
    """WTA health score of one camera over its trailing window."""

    camera: str
    score: float
    mean_spread: float = 0.0


@dataclasses.dataclass(frozen=True)
class CameraView:
    """Everything fusion and evaluation need from one camera, on the base plane."""

    camera: str
    samples: dict[int, CameraSample]
    raw: dict[int, Point2]  # measurements consumed by the selected track, projected

    def filtered(self) -> dict[int, Point2]:
        return {frame: s.point for frame, s in self.samples.items()}


@dataclasses.dataclass(frozen=True)
class FusedPoint:
    frame: int
    point: Point2
    source: str  # winning camera (WTA) or '+'-joined contributing cameras (weighted)
    carried: bool = False  # True when copied forward through a global occlusion


@dataclasses.dataclass(frozen=True)
class FusedTrack:
    method: FusionMethod
    points: tuple[FusedPoint, ...]

    def trajectory(self) -> dict[int, Point2]:
        return {p.frame: p.point for p in self.points}


def _healthy(samples: Sequence[CameraSample], cfg: FusionConfig, switching: bool = True) -> list[CameraSample]:
    kept = [s for s in samples if not (switching and s.misses >= cfg.miss_threshold)]
    return sorted(kept, key=lambda s: s.camera)


def contributing_cameras(samples: Sequence[CameraSample], cfg: FusionConfig) -> list[tuple[float, CameraSample]]:
    """
    Cameras that enter the weighted sum, with their raw (un-normalised) weights.

    A lone healthy camera contributes at full weight whatever its configured
    weight. With two or more survivors, zero-weight cameras drop out; when every
    survivor has weight 0 they contribute equally.
    """
    healthy = _healthy(samples, cfg, switching=cfg.switching)
    for s in healthy:
        if s.camera not in cfg.weights:
            raise ValueError(f"no fusion weight configured for camera '{s.camera}'")
    if not healthy:
        raise NoHealthySourceError(f"all {len(samples)} camera(s) excluded from weighted fusion")
    if len(healthy) == 1:
        return [(1.0, healthy[0])]
    weighted = [(cfg.weights[s.camera], s) for s in healthy if cfg.weights[s.camera] > 0.0]
    return weighted or [(1.0, s) for s in healthy]


def fuse_weighted(samples: Sequence[CameraSample], cfg: FusionConfig) -> Point2:
    """
    Weighted sum of the healthy cameras' points.

    Cameras with ``misses >= miss_threshold`` are dropped (unless switching is
    disabled) and the surviving weights are renormalised to 1. A single
    surviving camera is returned as-is.
    """
    weighted = contributing_cameras(samples, cfg)
    if len(weighted) == 1:
        return weighted[0][1].point

    total = math.fsum(w for w, _ in weighted)
    x = math.fsum(w * s.point.x for w, s in weighted) / total
    y = math.fsum(w * s.point.y for w, s in weighted) / total
    return Point2(x, y)


def camera_score(recent: Sequence[CameraSample], length: int | None = None) -> float:
    """
    Fraction of updated (measured) samples in the trailing window.

    ``length`` is the window size in frames; frames without a sample count as
    not updated. Defaults to ``len(recent)``.
    """
    if not recent:
        raise ValueError("camera_score needs a non-empty window")
    length = len(recent) if length is None else length
    if length < len(recent):
        raise ValueError(f"window length {length} shorter than its {len(recent)} sample(s)")
    return sum(1 for s in recent if s.updated) / length


def score_camera(camera: str, recent: Sequence[CameraSample], length: int | None = None) -> CameraScore:
    """Score plus mean spread, the pair WTA ranks on."""
    return CameraScore(
        camera=camera,
        score=camera_score(recent, length),
        mean_spread=math.fsum(s.spread for s in recent) / len(recent),
    )


def rank_cameras(scores: Sequence[CameraScore]) -> list[CameraScore]:
    """Best first: higher score, then smaller mean spread, then camera id."""
    return sorted(scores, key=lambda c: (-c.score, c.mean_spread, c.camera))


def fuse_wta(
    samples: Sequence[CameraSample],
    scores: Mapping[str, CameraScore],
    cfg: FusionConfig,
) -> tuple[Point2, str]:
    """Return the best-ranked healthy camera's point unchanged, with its id."""
    healthy = _healthy(samples, cfg)
    if not healthy:
        raise NoHealthySourceError(f"all {len(samples)} camera(s) excluded from winner-take-all")
    missing = [s.camera for s in healthy if s.camera not in scores]
    if missing:
        raise ValueError(f"no score for camera(s) {missing}")
    winner = rank_cameras([scores[s.camera] for s in healthy])[0].camera
    chosen = next(s for s in healthy if s.camera == winner)
    return chosen.point, winner


def fuse_ground_truth(points: Mapping[str, Point2] | Sequence[Point2]) -> Point2:
    """Average ground truth seen from several cameras; a single view passes through."""
    values = list(points.values()) if isinstance(points, Mapping) else list(points)
    if not values:
        raise NoSourceError("no ground-truth point present")
    if len(values) == 1:
        return values[0]
    n = len(values)
    return Point2(math.fsum(p.x for p in values) / n, math.fsum(p.y for p in values) / n)


def fuse_ground_truth_series(per_camera: Mapping[str, Mapping[int, Point2]]) -> dict[int, Point2]:
    """Apply ``fuse_ground_truth`` frame by frame over per-camera base-plane GT."""
    frames = sorted({f for series in per_camera.values() for f in series})
    return {
        f: fuse_ground_truth([series[f] for _, series in sorted(per_camera.items()) if f in series])
        for f in frames
    }


def _select(points: Sequence[tuple[int, TrackPoint]]) -> tuple[int, TrackPoint]:
    # single target per camera: measured beats predicted, then fewer misses, then older track
    return min(points, key=lambda item: (not item[1].updated, item[1].misses, item[0]))


def build_camera_view(camera: str, tracks: Sequence[Track], homography: Homography | None = None) -> CameraView:
    """Pick one track point per frame and project it (and its measurement) to the base plane."""
    homography = homography or Homography.identity()
    by_frame: dict[int, list[tuple[int, TrackPoint]]] = {}
    for track in tracks:
        for tp in track.points:
            by_frame.setdefault(tp.frame, []).append((track.id, tp))

    samples: dict[int, CameraSample] = {}
    raw: dict[int, Point2] = {}
    for frame in sorted(by_frame):
        _, tp = _select(by_frame[frame])
        samples[frame] = CameraSample(
            camera=camera,
            point=project(tp.point, homography),
            updated=tp.updated,
            misses=tp.misses,
            spread=tp.spread,
        )
        if tp.measurement is not None:
            raw[frame] = project(tp.measurement, homography)
    return CameraView(camera=camera, samples=samples, raw=raw)


def _scored(view: CameraView, frame: int, length: int, start: int) -> CameraScore:
    # frames inside the window but outside the run are not counted; absent frames are misses
    first = max(frame - length + 1, start)
    recent = [view.samples[f] for f in range(first, frame + 1) if f in view.samples]
    return score_camera(view.camera, recent, frame - first + 1)


def fuse_run(views: Sequence[CameraView], cfg: FusionConfig, method: FusionMethod | str) -> FusedTrack:
    """
    Fuse every frame covered by any camera.

    When no camera is usable the previous fused point is carried forward with
    ``carried=True``; frames before the first fused point are skipped.
    """
    method = FusionMethod(method)
    frames = sorted({f for v in views for f in v.samples})
    points: list[FusedPoint] = []
    if not frames:
        return FusedTrack(method=method, points=())

    for frame in range(frames[0], frames[-1] + 1):
        samples = [v.samples[frame] for v in views if frame in v.samples]
        try:
            if method is FusionMethod.WEIGHTED:
                point = fuse_weighted(samples, cfg)
                source = "+".join(s.camera for _, s in contributing_cameras(samples, cfg))
            else:
                scores = {
                    v.camera: _scored(v, frame, cfg.score_window, frames[0])
                    for v in views
                    if frame in v.samples
                }
                point, source = fuse_wta(samples, scores, cfg)
        except NoHealthySourceError:
            if not points:
                continue
            last = points[-1]
            logger.debug("%s fusion: frame %d carried forward from frame %d", method.value, frame, last.frame)
            points.append(FusedPoint(frame=frame, point=last.point, source=last.source, carried=True))
            continue
        points.append(FusedPoint(frame=frame, point=point, source=source))

    return FusedTrack(method=method, points=tuple(points))
