"""
PATH: src/multicam_fusion/pipeline.py
PURPOSE: Orchestrate simulate → track → fuse → evaluate and write every artifact
         of a run in one atomic step.

WHY: Results have to be reproducible and auditable: the same config and input
     files must give the same bytes, and a failing run must leave nothing
     half-written behind. All computation happens in memory first; files are
     staged in a scratch directory and only moved into place once every stage
     has succeeded.

FLOW:
┌──────────────────────┐   ┌──────────────────────────┐   ┌──────────────────────────┐
│ ingest detections +  │──▶│ track per camera, project │──▶│ fuse (weighted, wta),     │
│ ground truth         │   │ to base plane             │   │ staged report, write all  │
└──────────────────────┘   └──────────────────────────┘   └──────────────────────────┘

DEPENDENCIES:
- multicam_fusion.tracking / fusion / evaluation
- multicam_fusion.csvio
- multicam_fusion.config
"""

from __future__ import annotations

import contextlib
import dataclasses
import hashlib
import json
import logging
import os
import shutil
import tempfile
from collections.abc import Iterator, Mapping, Sequence
from pathlib import Path

from multicam_fusion import csvio
from multicam_fusion.config import RunConfig, ScenarioFile, to_run_config
from multicam_fusion.core import Detection, Homography, Point2, Track, project
from multicam_fusion.errors import FusionToolkitError, IngestionError, InvariantViolation
from multicam_fusion.evaluation import MseReport, render_table, staged_report
from multicam_fusion.fusion import (
    CameraView,
    FusedTrack,
    FusionMethod,
    build_camera_view,
    fuse_ground_truth_series,
    fuse_run,
)
from multicam_fusion.scenario import simulate
from multicam_fusion.tracking import track_cameras

logger = logging.getLogger(__name__)

GT_FILE = "gt.csv"
GT_CAMERAS_FILE = "gt_cameras.csv"
REPORT_CSV = "report.csv"
REPORT_CAMERAS_CSV = "report_cameras.csv"
REPORT_TXT = "report.txt"
PER_FRAME_CSV = "per_frame.csv"
MANIFEST_FILE = "manifest.json"
NO_GT_NOTE = "no ground truth configured; error report skipped"


def detections_file(camera: str) -> str:
    return f"detections_{camera}.csv"


def tracks_file(camera: str) -> str:
    return f"tracks_{camera}.csv"


def filtered_file(camera: str) -> str:
    return f"filtered_{camera}.csv"


def raw_file(camera: str) -> str:
    return f"raw_{camera}.csv"


def fused_file(method: FusionMethod) -> str:
    return f"fused_{method.value}.csv"


@dataclasses.dataclass
class PipelineResult:
    """In-memory outcome of a run, plus the files written for it."""

    tracks: dict[str, list[Track]]
    views: dict[str, CameraView]
    fused: dict[FusionMethod, FusedTrack] = dataclasses.field(default_factory=dict)
    report: MseReport | None = None
    files: list[Path] = dataclasses.field(default_factory=list)


@contextlib.contextmanager
def stage(name: str) -> Iterator[None]:
    """Tag any failure inside the block with the pipeline stage it came from."""
    logger.info("stage %s: start", name)
    try:
        yield
    except FusionToolkitError as e:
        if e.stage is None:
            e.stage = name
        raise
    except OSError as e:
        error = IngestionError(e.strerror or str(e), path=e.filename)
        error.stage = name
        raise error from e
    except Exception as e:
        error = InvariantViolation(f"{type(e).__name__}: {e}")
        error.stage = name
        raise error from e
    logger.info("stage %s: done", name)


@contextlib.contextmanager
def atomic_output(target: str | Path) -> Iterator[Path]:
    """
    Yield a scratch directory; on success move its files into ``target``.

    On failure the scratch directory is removed, and ``target`` too if this
    call created it and it is still empty.
    """
    target = Path(target)
    created = not target.exists()
    target.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=target))
    try:
        yield staging
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        if created and not any(target.iterdir()):
            target.rmdir()
        raise
    for item in sorted(staging.iterdir()):
        os.replace(item, target / item.name)
    staging.rmdir()


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(directory: Path, names: Sequence[str]) -> Path:
    """Hash every written file so a run directory can be audited later."""
    manifest = {"files": [{"file": name, "sha256": _sha256(directory / name)} for name in sorted(names)]}
    path = directory / MANIFEST_FILE
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


def simulate_scene(loaded: ScenarioFile, out_dir: str | Path, seed: int | None = None) -> list[Path]:
    """Write gt.csv, gt_cameras.csv, detections_<camera>.csv and run.yaml into ``out_dir``."""
    if seed is not None:
        loaded = dataclasses.replace(loaded, scenario=dataclasses.replace(loaded.scenario, seed=seed))
    out_dir = Path(out_dir)
    with stage("simulate"):
        output = simulate(loaded.scenario)

    names: list[str] = []
    with stage("write"), atomic_output(out_dir) as scratch:
        csvio.write_ground_truth(scratch / GT_FILE, output.gt_base)
        csvio.write_camera_ground_truth(scratch / GT_CAMERAS_FILE, output.gt_per_camera)
        names += [GT_FILE, GT_CAMERAS_FILE]
        for camera, detections in output.detections.items():
            csvio.write_detections(scratch / detections_file(camera), detections)
            names.append(detections_file(camera))
        names.append(to_run_config(loaded, scratch, ground_truth=GT_FILE).name)
    logger.info("scenario %s (seed %d) written to %s", loaded.scenario.name, loaded.scenario.seed, out_dir)
    return [out_dir / name for name in names]


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------


def load_detections(cfg: RunConfig) -> dict[str, list[Detection]]:
    streams: dict[str, list[Detection]] = {}
    for cam in cfg.cameras:
        detections = csvio.read_detections(cam.detections, sort=cfg.sort_detections)
        strays = sorted({d.camera for d in detections} - {cam.id})
        if strays:
            raise IngestionError(
                f"file for camera '{cam.id}' holds rows for camera(s) {strays}",
                path=str(cam.detections),
            )
        logger.info("camera %s: %d detections from %s", cam.id, len(detections), cam.detections)
        streams[cam.id] = detections
    return streams


def ground_truth_on_base(
    gt: csvio.GroundTruth,
    homographies: Mapping[str, Homography],
    path: str | None = None,
) -> dict[int, Point2]:
    """Base-plane GT as-is; per-camera GT projected with each camera's map and averaged per frame."""
    if gt.base is not None:
        return gt.base
    per_camera = gt.per_camera or {}
    unknown = sorted(set(per_camera) - set(homographies))
    if unknown:
        raise IngestionError(f"ground truth names unconfigured camera(s) {unknown}", path=path)
    projected = {
        camera: {f: project(p, homographies[camera]) for f, p in series.items()}
        for camera, series in per_camera.items()
    }
    return fuse_ground_truth_series(projected)


def load_ground_truth(cfg: RunConfig) -> dict[int, Point2] | None:
    if cfg.ground_truth is None:
        return None
    gt = csvio.read_ground_truth(cfg.ground_truth)
    return ground_truth_on_base(gt, cfg.homographies(), path=str(cfg.ground_truth))


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def run_tracking(cfg: RunConfig, streams: Mapping[str, Sequence[Detection]]) -> dict[str, list[Track]]:
    tracks = track_cameras(streams, cfg.tracker, parallel=cfg.parallel)
    for camera, camera_tracks in tracks.items():
        logger.info("camera %s: %d track(s)", camera, len(camera_tracks))
    return tracks


def build_views(cfg: RunConfig, tracks: Mapping[str, Sequence[Track]]) -> dict[str, CameraView]:
    homographies = cfg.homographies()
    return {
        camera: build_camera_view(camera, camera_tracks, homographies[camera])
        for camera, camera_tracks in tracks.items()
    }


def run_fusion(cfg: RunConfig, views: Mapping[str, CameraView]) -> dict[FusionMethod, FusedTrack]:
    fused = {method: fuse_run(list(views.values()), cfg.fusion, method) for method in FusionMethod}
    for method, track in fused.items():
        carried = sum(1 for p in track.points if p.carried)
        logger.info("%s fusion: %d point(s), %d carried forward", method.value, len(track.points), carried)
    return fused


def run_evaluation(
    views: Mapping[str, CameraView],
    fused: Mapping[FusionMethod, FusedTrack],
    gt: Mapping[int, Point2],
    stages: Sequence[str] | None = None,
) -> MseReport:
    return staged_report(
        raw={camera: view.raw for camera, view in views.items()},
        filtered={camera: view.filtered() for camera, view in views.items()},
        weighted=fused.get(FusionMethod.WEIGHTED),
        wta=fused.get(FusionMethod.WTA),
        gt=gt,
        per_frame=True,
        stages=stages,
    )


def _load_tracks(cfg: RunConfig, tracks_dir: Path) -> dict[str, list[Track]]:
    return {cam.id: csvio.read_tracks(tracks_dir / tracks_file(cam.id), cam.id) for cam in cfg.cameras}


# ---------------------------------------------------------------------------
# Writers
# ---------------------------------------------------------------------------


def _write_tracking(
    directory: Path,
    tracks: Mapping[str, Sequence[Track]],
    views: Mapping[str, CameraView],
) -> list[str]:
    names: list[str] = []
    for camera, camera_tracks in tracks.items():
        csvio.write_tracks(directory / tracks_file(camera), camera_tracks)
        csvio.write_filtered(directory / filtered_file(camera), views[camera])
        csvio.write_trajectory(directory / raw_file(camera), views[camera].raw)
        names += [tracks_file(camera), filtered_file(camera), raw_file(camera)]
    return names


def _write_fusion(directory: Path, fused: Mapping[FusionMethod, FusedTrack]) -> list[str]:
    for method, track in fused.items():
        csvio.write_fused(directory / fused_file(method), track)
    return [fused_file(method) for method in fused]


def _write_report(directory: Path, report: MseReport | None) -> list[str]:
    if report is None:
        report = MseReport(notes=[NO_GT_NOTE])
    csvio.write_report(directory / REPORT_CSV, report)
    csvio.write_camera_report(directory / REPORT_CAMERAS_CSV, report)
    csvio.write_per_frame(directory / PER_FRAME_CSV, report)
    (directory / REPORT_TXT).write_text(render_table(report), encoding="utf-8")
    return [REPORT_CSV, REPORT_CAMERAS_CSV, PER_FRAME_CSV, REPORT_TXT]


def _commit(out_dir: Path, writers: Sequence) -> list[Path]:
    names: list[str] = []
    with stage("write"), atomic_output(out_dir) as scratch:
        for write in writers:
            names += write(scratch)
        names.append(write_manifest(scratch, names).name)
    logger.info("wrote %d file(s) to %s", len(names), out_dir)
    return [out_dir / name for name in names]


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------


def track_run(cfg: RunConfig, out_dir: str | Path | None = None) -> PipelineResult:
    """Ingest and track; write tracks, filtered and raw CSVs."""
    out_dir = Path(out_dir) if out_dir is not None else cfg.output_dir
    with stage("ingest"):
        streams = load_detections(cfg)
    with stage("track"):
        tracks = run_tracking(cfg, streams)
        views = build_views(cfg, tracks)
    result = PipelineResult(tracks=tracks, views=views)
    result.files = _commit(out_dir, [lambda d: _write_tracking(d, tracks, views)])
    return result


def fuse_only(
    cfg: RunConfig,
    out_dir: str | Path | None = None,
    tracks_dir: str | Path | None = None,
) -> PipelineResult:
    """Fuse tracks read from ``tracks_dir`` (or tracked afresh from detections); write fused CSVs."""
    out_dir = Path(out_dir) if out_dir is not None else cfg.output_dir
    if tracks_dir is not None:
        with stage("ingest"):
            tracks = _load_tracks(cfg, Path(tracks_dir))
    else:
        with stage("ingest"):
            streams = load_detections(cfg)
        with stage("track"):
            tracks = run_tracking(cfg, streams)
    with stage("project"):
        views = build_views(cfg, tracks)
    with stage("fuse"):
        fused = run_fusion(cfg, views)
    result = PipelineResult(tracks=tracks, views=views, fused=fused)
    result.files = _commit(out_dir, [lambda d: _write_fusion(d, fused)])
    return result


def run_pipeline(
    cfg: RunConfig,
    out_dir: str | Path | None = None,
    stages: Sequence[str] | None = None,
) -> PipelineResult:
    """
    Full chain. Without ground truth the tracking and fusion outputs are
    still written and the report carries an explanatory note instead of rows.
    """
    out_dir = Path(out_dir) if out_dir is not None else cfg.output_dir
    with stage("ingest"):
        streams = load_detections(cfg)
        gt = load_ground_truth(cfg)
    with stage("track"):
        tracks = run_tracking(cfg, streams)
    with stage("project"):
        views = build_views(cfg, tracks)
    with stage("fuse"):
        fused = run_fusion(cfg, views)
    report = None
    if gt is not None:
        with stage("evaluate"):
            report = run_evaluation(views, fused, gt, stages=stages)
    else:
        logger.warning(NO_GT_NOTE)

    result = PipelineResult(tracks=tracks, views=views, fused=fused, report=report)
    result.files = _commit(
        out_dir,
        [
            lambda d: _write_tracking(d, tracks, views),
            lambda d: _write_fusion(d, fused),
            lambda d: _write_report(d, report),
        ],
    )
    return result
