"""
PATH: src/multicam_fusion/tracking.py
PURPOSE: Per-camera track lifecycle: associate detections to tracks, step each
         track's filter, carry predict-only points through gaps, terminate
         stale tracks.

WHY: The filter only knows one target. A camera stream can hold several
     detections per frame and holes of arbitrary length, so something has to
     decide which detection feeds which filter and when a track is gone.

FLOW:
┌──────────────────────┐   ┌──────────────────────────┐   ┌──────────────────────────┐
│ predict live tracks  │──▶│ greedy nearest-neighbour  │──▶│ update / miss / birth /   │
│                      │   │ association within gate   │   │ kill, emit TrackPoints    │
└──────────────────────┘   └──────────────────────────┘   └──────────────────────────┘

DEPENDENCIES:
- numpy
- scipy (pairwise distances)
"""

from __future__ import annotations

import dataclasses
import itertools
import logging
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.spatial.distance import cdist

from multicam_fusion.core import Detection, Point2, Track, TrackPoint, centroid
from multicam_fusion.errors import UnsortedInputError
from multicam_fusion.estimation import (
    FilterState,
    MotionModel,
    NoiseConfig,
    init_filter,
    position,
    predict,
    spread,
    update,
)

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class TrackerConfig:
    """Motion model, noise scales, association gate and termination threshold."""

    model: MotionModel = MotionModel()
    noise: NoiseConfig = NoiseConfig()
    gate_radius: float = 50.0
    max_misses: int = 30

    def __post_init__(self) -> None:
        if not self.gate_radius > 0:
            raise ValueError(f"gate_radius must be > 0, got {self.gate_radius}")
        if self.max_misses < 1:
            raise ValueError(f"max_misses must be >= 1, got {self.max_misses}")


@dataclasses.dataclass
class LiveTrack:
    """A track still being filtered: accumulated points plus current filter."""

    id: int
    camera: str
    filter: FilterState
    points: list[TrackPoint] = dataclasses.field(default_factory=list)

    def emit(self, measurement: Point2 | None) -> None:
        self.points.append(
            TrackPoint(
                frame=self.filter.frame,
                point=position(self.filter),
                updated=measurement is not None,
                spread=spread(self.filter),
                misses=self.filter.misses,
                measurement=measurement,
            )
        )

    def to_track(self) -> Track:
        return Track(id=self.id, camera=self.camera, points=tuple(self.points))


@dataclasses.dataclass(frozen=True)
class Assignment:
    """Outcome of one frame's association."""

    matches: dict[int, int]  # track id → detection index
    unmatched_tracks: tuple[int, ...]
    unmatched_detections: tuple[int, ...]  # in detection order; these birth new tracks


def associate(
    predicted: Sequence[tuple[int, Point2]],
    detections: Sequence[Detection],
    gate: float,
) -> Assignment:
    """
    Greedy nearest-neighbour assignment of detections to predicted track positions.

    ``predicted`` holds ``(track_id, position)`` pairs, not live tracks: the
    caller predicts each track to this frame first, i.e.
    ``position(predict(track.filter))``.

    Pairs are taken in ascending distance; ties go to the lower track id, then
    the earlier detection. Pairs farther apart than ``gate`` stay unassigned.
    """
    frames = {d.frame for d in detections}
    if len(frames) > 1:
        raise ValueError(f"associate expects detections from one frame, got frames {sorted(frames)}")

    if not predicted or not detections:
        return Assignment(
            matches={},
            unmatched_tracks=tuple(tid for tid, _ in predicted),
            unmatched_detections=tuple(range(len(detections))),
        )

    track_xy = np.array([[p.x, p.y] for _, p in predicted])
    det_xy = np.array([[d.bbox.cx, d.bbox.cy] for d in detections])
    dist = cdist(track_xy, det_xy)

    candidates = sorted(
        (float(dist[i, j]), predicted[i][0], j)
        for i, j in itertools.product(range(len(predicted)), range(len(detections)))
        if dist[i, j] <= gate
    )

    matches: dict[int, int] = {}
    used: set[int] = set()
    for _, track_id, det_index in candidates:
        if track_id in matches or det_index in used:
            continue
        matches[track_id] = det_index
        used.add(det_index)

    return Assignment(
        matches=matches,
        unmatched_tracks=tuple(tid for tid, _ in predicted if tid not in matches),
        unmatched_detections=tuple(j for j in range(len(detections)) if j not in used),
    )


def _group_by_frame(detections: Iterable[Detection]) -> list[tuple[int, list[Detection]]]:
    groups: list[tuple[int, list[Detection]]] = []
    last_frame: int | None = None
    for index, det in enumerate(detections):
        if last_frame is not None and det.frame < last_frame:
            raise UnsortedInputError(
                f"detection #{index} ({det.camera}) has frame {det.frame} after frame {last_frame}"
            )
        if last_frame is None or det.frame != last_frame:
            groups.append((det.frame, []))
            last_frame = det.frame
        groups[-1][1].append(det)
    return groups


def run_tracker(detections: Iterable[Detection], cfg: TrackerConfig, camera: str | None = None) -> list[Track]:
    """
    Track one camera's frame-sorted detection stream.

    Per frame: predict every live track, associate, update matched tracks,
    miss the unmatched ones (predict-only points), birth tracks from leftover
    detections, and drop tracks whose miss count exceeds ``max_misses``.
    Frames between detections still step the live tracks.
    """
    groups = _group_by_frame(detections)
    if not groups:
        return []
    if camera is None:
        camera = groups[0][1][0].camera
    by_frame = dict(groups)

    live: list[LiveTrack] = []
    finished: list[Track] = []
    next_id = 0

    for frame in range(groups[0][0], groups[-1][0] + 1):
        frame_dets = by_frame.get(frame, [])
        predicted = {t.id: predict(t.filter) for t in live}
        assignment = associate(
            [(tid, position(state)) for tid, state in predicted.items()],
            frame_dets,
            cfg.gate_radius,
        )

        survivors: list[LiveTrack] = []
        for track in live:
            det_index = assignment.matches.get(track.id)
            if det_index is not None:
                z = centroid(frame_dets[det_index].bbox)
                track.filter = update(predicted[track.id], z)
                track.emit(z)
                survivors.append(track)
                continue
            track.filter = dataclasses.replace(predicted[track.id], misses=track.filter.misses + 1)
            if track.filter.misses > cfg.max_misses:
                logger.debug("camera %s: track %d terminated at frame %d", camera, track.id, frame)
                finished.append(track.to_track())
                continue
            track.emit(None)
            survivors.append(track)

        for det_index in assignment.unmatched_detections:
            det = frame_dets[det_index]
            born = LiveTrack(id=next_id, camera=camera, filter=init_filter(det, cfg.model, cfg.noise))
            born.emit(centroid(det.bbox))
            logger.debug("camera %s: track %d born at frame %d", camera, next_id, frame)
            survivors.append(born)
            next_id += 1

        live = survivors

    finished.extend(t.to_track() for t in live)
    return sorted(finished, key=lambda t: t.id)


def track_cameras(
    streams: Mapping[str, Sequence[Detection]],
    cfg: TrackerConfig,
    parallel: bool = False,
) -> dict[str, list[Track]]:
    """Run one tracker per camera, optionally on a thread pool. Output keeps input camera order."""
    cameras = list(streams)
    if parallel and len(cameras) > 1:
        with ThreadPoolExecutor(max_workers=len(cameras)) as pool:
            results = list(pool.map(lambda cam: run_tracker(streams[cam], cfg, camera=cam), cameras))
    else:
        results = [run_tracker(streams[cam], cfg, camera=cam) for cam in cameras]
    return dict(zip(cameras, results))

