"""
PATH: src/multicam_fusion/evaluation.py
PURPOSE: Mean squared error between estimated and ground-truth trajectories, and
         the staged raw → filtered → weighted → wta report.

WHY: The whole toolkit exists to show that each stage lowers the error. The
     report keeps the stage order fixed, reports a stage as absent (never as
     zero) when it has no data, and carries per-frame series for plotting.

FLOW:
┌──────────────────────┐   ┌──────────────────────────┐   ┌──────────────────────────┐
│ trajectories per     │──▶│ common-frame squared      │──▶│ MseReport (+ per-camera,  │
│ stage + base GT      │   │ Euclidean errors          │   │ per-frame series)         │
└──────────────────────┘   └──────────────────────────┘   └──────────────────────────┘

DEPENDENCIES:
- multicam_fusion.core
- multicam_fusion.fusion (FusedTrack → trajectory)
"""

from __future__ import annotations

import dataclasses
import math
from collections.abc import Iterable, Mapping, Sequence
from typing import Union

from multicam_fusion.core import Point2, Track
from multicam_fusion.errors import NoOverlapError
from multicam_fusion.fusion import FusedTrack

STAGE_ORDER = ("raw", "filtered", "weighted", "wta")
PER_CAMERA_STAGES = ("raw", "filtered")

TrajectoryLike = Union[Track, FusedTrack, Mapping[int, Point2]]


def as_trajectory(estimate: TrajectoryLike) -> dict[int, Point2]:
    """Normalise a Track, FusedTrack or frame→point mapping to a dict."""
    if isinstance(estimate, Track):
        return {tp.frame: tp.point for tp in estimate.points}
    if isinstance(estimate, FusedTrack):
        return estimate.trajectory()
    return dict(estimate)


@dataclasses.dataclass(frozen=True)
class ErrorStats:
    """Error of one estimate (or pooled estimates) against ground truth."""

    mse: float
    rmse: float
    mean_dist: float
    frames: int
    skipped: int = 0
    per_frame: tuple[tuple[int, float], ...] = ()

    def __iter__(self):
        # unpacks as (value, frames_compared)
        return iter((self.mse, self.frames))


@dataclasses.dataclass
class MseReport:
    """Stage name → error, in STAGE_ORDER, plus optional per-camera rows."""

    stages: dict[str, ErrorStats] = dataclasses.field(default_factory=dict)
    cameras: dict[tuple[str, str], ErrorStats] = dataclasses.field(default_factory=dict)
    notes: list[str] = dataclasses.field(default_factory=list)

    @property
    def frames_compared(self) -> dict[str, int]:
        return {name: s.frames for name, s in self.stages.items()}

    @property
    def per_frame(self) -> dict[str, tuple[tuple[int, float], ...]]:
        return {name: s.per_frame for name, s in self.stages.items() if s.per_frame}

    def value(self, stage: str) -> float | None:
        s = self.stages.get(stage)
        return s.mse if s else None


def _squared_errors(estimate: Mapping[int, Point2], gt: Mapping[int, Point2]) -> tuple[list[tuple[int, float]], int]:
    common = sorted(set(estimate) & set(gt))
    skipped = len(set(estimate) ^ set(gt))
    return [(f, estimate[f].squared_distance_to(gt[f])) for f in common], skipped


def _stats(errors: Sequence[float], skipped: int, per_frame: Iterable[tuple[int, float]] = ()) -> ErrorStats:
    n = len(errors)
    value = math.fsum(errors) / n
    return ErrorStats(
        mse=value,
        rmse=math.sqrt(value),
        mean_dist=math.fsum(math.sqrt(e) for e in errors) / n,
        frames=n,
        skipped=skipped,
        per_frame=tuple(per_frame),
    )


def mse(estimate: TrajectoryLike, gt: TrajectoryLike, keep_per_frame: bool = False) -> ErrorStats:
    """
    Mean squared Euclidean distance over the frames both trajectories cover.

    Frames present in only one trajectory are skipped and counted in
    ``skipped``. Raises NoOverlapError when no frame is shared.
    """
    errors, skipped = _squared_errors(as_trajectory(estimate), as_trajectory(gt))
    if not errors:
        raise NoOverlapError("estimate and ground truth share no frame")
    return _stats([e for _, e in errors], skipped, errors if keep_per_frame else ())


def pooled_mse(
    estimates: Mapping[str, TrajectoryLike],
    gt: TrajectoryLike,
    keep_per_frame: bool = False,
) -> ErrorStats:
    """MSE over every (camera, frame) pair; per-frame series averages the cameras at each frame."""
    gt_traj = as_trajectory(gt)
    errors: list[float] = []
    skipped = 0
    by_frame: dict[int, list[float]] = {}
    for _, estimate in sorted(estimates.items()):
        camera_errors, camera_skipped = _squared_errors(as_trajectory(estimate), gt_traj)
        skipped += camera_skipped
        for frame, e in camera_errors:
            errors.append(e)
            by_frame.setdefault(frame, []).append(e)
    if not errors:
        raise NoOverlapError("no camera shares a frame with the ground truth")
    per_frame = [(f, math.fsum(v) / len(v)) for f, v in sorted(by_frame.items())] if keep_per_frame else []
    return _stats(errors, skipped, per_frame)


def _has_data(stage_input: Mapping | TrajectoryLike | None) -> bool:
    if stage_input is None:
        return False
    if isinstance(stage_input, (Track, FusedTrack)):
        return bool(stage_input.points)
    return bool(stage_input)


def staged_report(
    raw: Mapping[str, TrajectoryLike] | None,
    filtered: Mapping[str, TrajectoryLike] | None,
    weighted: TrajectoryLike | None,
    wta: TrajectoryLike | None,
    gt: TrajectoryLike,
    per_frame: bool = False,
    stages: Sequence[str] | None = None,
) -> MseReport:
    """
    Build the staged report in the fixed order raw, filtered, weighted, wta.

    ``raw`` and ``filtered`` are per-camera and pooled into one row each, with a
    per-camera breakdown alongside. A stage without data is left out.
    """
    wanted = set(stages) if stages is not None else set(STAGE_ORDER)
    unknown = wanted - set(STAGE_ORDER)
    if unknown:
        raise ValueError(f"unknown stage(s) {sorted(unknown)}; expected a subset of {STAGE_ORDER}")

    report = MseReport()
    inputs = {"raw": raw, "filtered": filtered, "weighted": weighted, "wta": wta}
    for stage in STAGE_ORDER:
        data = inputs[stage]
        if stage not in wanted:
            continue
        if not _has_data(data):
            report.notes.append(f"stage '{stage}' has no data and is omitted")
            continue
        if stage in PER_CAMERA_STAGES:
            cameras = {cam: traj for cam, traj in data.items() if _has_data(traj)}
            if not cameras:
                report.notes.append(f"stage '{stage}' has no data and is omitted")
                continue
            report.stages[stage] = pooled_mse(cameras, gt, keep_per_frame=per_frame)
            for camera, traj in sorted(cameras.items()):
                try:
                    report.cameras[(stage, camera)] = mse(traj, gt)
                except NoOverlapError:
                    report.notes.append(
                        f"camera '{camera}' has no frame in common with ground truth at stage '{stage}'"
                    )
        else:
            report.stages[stage] = mse(data, gt, keep_per_frame=per_frame)
    return report


def render_table(report: MseReport) -> str:
    """Aligned plain-text table, two decimals."""
    header = ("stage", "mse", "rmse", "mean_dist", "frames")
    rows = [
        (name, f"{s.mse:.2f}", f"{s.rmse:.2f}", f"{s.mean_dist:.2f}", str(s.frames))
        for name, s in report.stages.items()
    ]
    rows += [
        (f"{stage}[{camera}]", f"{s.mse:.2f}", f"{s.rmse:.2f}", f"{s.mean_dist:.2f}", str(s.frames))
        for (stage, camera), s in report.cameras.items()
    ]
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]

    def fmt(row: Sequence[str]) -> str:
        first = row[0].ljust(widths[0])
        rest = [cell.rjust(w) for cell, w in zip(row[1:], widths[1:])]
        return "  ".join([first, *rest]).rstrip()

    lines = [fmt(header), "  ".join("-" * w for w in widths)]
    lines += [fmt(r) for r in rows]
    lines += [f"note: {n}" for n in report.notes]
    return "\n".join(lines) + "\n"
