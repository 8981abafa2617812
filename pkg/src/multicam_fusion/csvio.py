"""
PATH: src/multicam_fusion/csvio.py
PURPOSE: Read and write every CSV the toolkit consumes or emits.

WHY: Inputs come from detectors and annotation tools we do not control, so
     ingestion names the file, row and column of anything it rejects. Outputs
     must re-ingest bit for bit, so floats are written with 17 significant
     digits and lines always end in a bare newline.

SCHEMAS:
    detections      frame,camera,track,cx,cy,w,h,confidence   (track, confidence may be empty)
    ground truth    frame,x,y            (base plane)
                    frame,camera,cx,cy   (per camera, pre-projection)
    tracks          frame,track,x,y,updated,misses,spread,mx,my
    trajectory      frame,x,y[,...]      (filtered_*, raw_*)
    fused           frame,x,y,source,carried
    report          stage,mse,rmse,mean_dist,frames
    camera report   stage,camera,mse,rmse,mean_dist,frames
    per-frame       frame,stage,sq_error

DEPENDENCIES:
- csv (stdlib)
"""

from __future__ import annotations

import csv
import dataclasses
import math
from collections.abc import Iterable, Iterator, Mapping, Sequence
from pathlib import Path

from multicam_fusion.core import BBox, Detection, Point2, Track, TrackPoint
from multicam_fusion.errors import IngestionError
from multicam_fusion.evaluation import ErrorStats, MseReport
from multicam_fusion.fusion import CameraView, FusedPoint, FusedTrack, FusionMethod

DETECTION_COLUMNS = ("frame", "camera", "track", "cx", "cy", "w", "h", "confidence")
GT_BASE_COLUMNS = ("frame", "x", "y")
GT_CAMERA_COLUMNS = ("frame", "camera", "cx", "cy")
TRACK_COLUMNS = ("frame", "track", "x", "y", "updated", "misses", "spread", "mx", "my")
FILTERED_COLUMNS = ("frame", "x", "y", "updated", "misses", "spread")
FUSED_COLUMNS = ("frame", "x", "y", "source", "carried")
REPORT_COLUMNS = ("stage", "mse", "rmse", "mean_dist", "frames")
CAMERA_REPORT_COLUMNS = ("stage", "camera", "mse", "rmse", "mean_dist", "frames")
PER_FRAME_COLUMNS = ("frame", "stage", "sq_error")


def fmt(value: float) -> str:
    """Lossless double formatting."""
    return f"{value:.17g}"


@dataclasses.dataclass(frozen=True)
class GroundTruth:
    """Either base-plane GT, per-camera image-plane GT, or both."""

    base: dict[int, Point2] | None = None
    per_camera: dict[str, dict[int, Point2]] | None = None


class _Rows:
    """DictReader wrapper that knows the file and row it is on."""

    def __init__(self, path: Path, required: Sequence[str]):
        self.path = path
        self.required = required
        self.row = 1

    def __iter__(self) -> Iterator[dict[str, str]]:
        try:
            handle = open(self.path, "r", encoding="ascii", newline="")
        except OSError as e:
            raise IngestionError(f"cannot open: {e.strerror}", path=str(self.path)) from e
        with handle:
            reader = csv.DictReader(handle)
            try:
                header = reader.fieldnames
            except UnicodeDecodeError as e:
                raise IngestionError("file is not ASCII", path=str(self.path), row=1) from e
            if not header:
                raise IngestionError("missing header", path=str(self.path), row=1)
            missing = [c for c in self.required if c not in header]
            if missing:
                raise IngestionError(f"header lacks column(s) {missing}", path=str(self.path), row=1)
            try:
                for record in reader:
                    self.row = reader.line_num
                    if None in record or any(v is None for v in record.values()):
                        raise self.error("wrong number of fields")
                    yield record
            except UnicodeDecodeError as e:
                raise IngestionError("file is not ASCII", path=str(self.path), row=self.row + 1) from e

    def error(self, message: str, column: str | None = None) -> IngestionError:
        return IngestionError(message, path=str(self.path), row=self.row, column=column)

    def integer(self, record: Mapping[str, str], column: str, minimum: int | None = None) -> int:
        text = record[column].strip()
        try:
            value = int(text)
        except ValueError:
            raise self.error(f"expected an integer, got '{text}'", column) from None
        if minimum is not None and value < minimum:
            raise self.error(f"must be >= {minimum}, got {value}", column)
        return value

    def number(self, record: Mapping[str, str], column: str) -> float:
        text = record[column].strip()
        try:
            value = float(text)
        except ValueError:
            raise self.error(f"expected a number, got '{text}'", column) from None
        if not math.isfinite(value):
            raise self.error(f"must be finite, got '{text}'", column)
        return value

    def optional_number(self, record: Mapping[str, str], column: str) -> float | None:
        return None if record.get(column, "").strip() == "" else self.number(record, column)

    def optional_integer(self, record: Mapping[str, str], column: str) -> int | None:
        return None if record.get(column, "").strip() == "" else self.integer(record, column)

    def flag(self, record: Mapping[str, str], column: str) -> bool:
        text = record[column].strip()
        if text not in ("0", "1"):
            raise self.error(f"expected 0 or 1, got '{text}'", column)
        return text == "1"


def _writer(path: Path, columns: Sequence[str]) -> tuple[csv.writer, object]:
    handle = open(path, "w", encoding="ascii", newline="")
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(columns)
    return writer, handle


def _write(path: str | Path, columns: Sequence[str], rows: Iterable[Sequence[object]]) -> Path:
    path = Path(path)
    writer, handle = _writer(path, columns)
    with handle:
        writer.writerows(rows)
    return path


# ---------------------------------------------------------------------------
# Detections and ground truth
# ---------------------------------------------------------------------------


def read_detections(path: str | Path, sort: bool = False) -> list[Detection]:
    """
    Read a detection CSV.

    With ``sort=False`` a decreasing frame index is an IngestionError naming
    the row; with ``sort=True`` rows are stably sorted by frame instead.
    """
    rows = _Rows(Path(path), DETECTION_COLUMNS)
    detections: list[Detection] = []
    for record in rows:
        frame = rows.integer(record, "frame", minimum=0)
        if not sort and detections and frame < detections[-1].frame:
            raise rows.error(f"frame {frame} follows frame {detections[-1].frame}", "frame")
        camera = record["camera"].strip()
        if not camera:
            raise rows.error("camera id is empty", "camera")
        try:
            bbox = BBox(
                rows.number(record, "cx"),
                rows.number(record, "cy"),
                rows.number(record, "w"),
                rows.number(record, "h"),
            )
            detection = Detection(
                frame=frame,
                camera=camera,
                bbox=bbox,
                confidence=rows.optional_number(record, "confidence"),
                track=rows.optional_integer(record, "track"),
            )
        except ValueError as e:
            raise rows.error(str(e)) from None
        detections.append(detection)
    if sort:
        detections.sort(key=lambda d: d.frame)
    return detections


def write_detections(path: str | Path, detections: Iterable[Detection]) -> Path:
    return _write(
        path,
        DETECTION_COLUMNS,
        (
            (
                d.frame,
                d.camera,
                "" if d.track is None else d.track,
                fmt(d.bbox.cx),
                fmt(d.bbox.cy),
                fmt(d.bbox.w),
                fmt(d.bbox.h),
                "" if d.confidence is None else fmt(d.confidence),
            )
            for d in detections
        ),
    )


def _header(path: Path) -> list[str]:
    try:
        with open(path, "r", encoding="ascii", newline="") as handle:
            return next(csv.reader(handle), [])
    except OSError as e:
        raise IngestionError(f"cannot open: {e.strerror}", path=str(path)) from e
    except UnicodeDecodeError as e:
        raise IngestionError("file is not ASCII", path=str(path), row=1) from e


def read_ground_truth(path: str | Path) -> GroundTruth:
    """Read either GT form, chosen by the header."""
    path = Path(path)
    header = _header(path)
    if all(c in header for c in GT_BASE_COLUMNS):
        return GroundTruth(base=read_trajectory(path))
    if all(c in header for c in GT_CAMERA_COLUMNS):
        rows = _Rows(path, GT_CAMERA_COLUMNS)
        per_camera: dict[str, dict[int, Point2]] = {}
        for record in rows:
            frame = rows.integer(record, "frame", minimum=0)
            camera = record["camera"].strip()
            series = per_camera.setdefault(camera, {})
            if frame in series:
                raise rows.error(f"duplicate frame {frame} for camera '{camera}'", "frame")
            series[frame] = Point2(rows.number(record, "cx"), rows.number(record, "cy"))
        return GroundTruth(per_camera=per_camera)
    raise IngestionError(
        f"header {header} matches neither {list(GT_BASE_COLUMNS)} nor {list(GT_CAMERA_COLUMNS)}",
        path=str(path),
        row=1,
    )


def write_ground_truth(path: str | Path, gt: Mapping[int, Point2]) -> Path:
    return _write(path, GT_BASE_COLUMNS, ((f, fmt(p.x), fmt(p.y)) for f, p in sorted(gt.items())))


def write_camera_ground_truth(path: str | Path, per_camera: Mapping[str, Mapping[int, Point2]]) -> Path:
    return _write(
        path,
        GT_CAMERA_COLUMNS,
        (
            (f, camera, fmt(p.x), fmt(p.y))
            for camera, series in per_camera.items()
            for f, p in sorted(series.items())
        ),
    )


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------


def read_trajectory(path: str | Path) -> dict[int, Point2]:
    """Read any CSV with frame,x,y columns; other columns are ignored."""
    rows = _Rows(Path(path), GT_BASE_COLUMNS)
    out: dict[int, Point2] = {}
    for record in rows:
        frame = rows.integer(record, "frame", minimum=0)
        if frame in out:
            raise rows.error(f"duplicate frame {frame}", "frame")
        out[frame] = Point2(rows.number(record, "x"), rows.number(record, "y"))
    return out


def write_trajectory(path: str | Path, trajectory: Mapping[int, Point2]) -> Path:
    return write_ground_truth(path, trajectory)


def write_tracks(path: str | Path, tracks: Sequence[Track]) -> Path:
    def rows() -> Iterator[tuple[object, ...]]:
        for track in tracks:
            for tp in track.points:
                m = tp.measurement
                yield (
                    tp.frame,
                    track.id,
                    fmt(tp.point.x),
                    fmt(tp.point.y),
                    int(tp.updated),
                    tp.misses,
                    fmt(tp.spread),
                    "" if m is None else fmt(m.x),
                    "" if m is None else fmt(m.y),
                )

    return _write(path, TRACK_COLUMNS, rows())


def read_tracks(path: str | Path, camera: str) -> list[Track]:
    """Re-ingest a tracks CSV written by ``write_tracks``."""
    rows = _Rows(Path(path), TRACK_COLUMNS)
    points: dict[int, list[TrackPoint]] = {}
    for record in rows:
        mx = rows.optional_number(record, "mx")
        my = rows.optional_number(record, "my")
        try:
            tp = TrackPoint(
                frame=rows.integer(record, "frame", minimum=0),
                point=Point2(rows.number(record, "x"), rows.number(record, "y")),
                updated=rows.flag(record, "updated"),
                spread=rows.number(record, "spread"),
                misses=rows.integer(record, "misses", minimum=0),
                measurement=None if mx is None or my is None else Point2(mx, my),
            )
        except ValueError as e:
            raise rows.error(str(e)) from None
        points.setdefault(rows.integer(record, "track", minimum=0), []).append(tp)
    try:
        return [Track(id=tid, camera=camera, points=tuple(pts)) for tid, pts in sorted(points.items())]
    except ValueError as e:
        raise IngestionError(str(e), path=str(path)) from None


def write_filtered(path: str | Path, view: CameraView) -> Path:
    return _write(
        path,
        FILTERED_COLUMNS,
        (
            (f, fmt(s.point.x), fmt(s.point.y), int(s.updated), s.misses, fmt(s.spread))
            for f, s in sorted(view.samples.items())
        ),
    )


def write_fused(path: str | Path, fused: FusedTrack) -> Path:
    return _write(
        path,
        FUSED_COLUMNS,
        ((p.frame, fmt(p.point.x), fmt(p.point.y), p.source, int(p.carried)) for p in fused.points),
    )


def read_fused(path: str | Path, method: FusionMethod | str) -> FusedTrack:
    rows = _Rows(Path(path), FUSED_COLUMNS)
    points = [
        FusedPoint(
            frame=rows.integer(record, "frame", minimum=0),
            point=Point2(rows.number(record, "x"), rows.number(record, "y")),
            source=record["source"],
            carried=rows.flag(record, "carried"),
        )
        for record in rows
    ]
    return FusedTrack(method=FusionMethod(method), points=tuple(points))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def _stats_row(s: ErrorStats) -> tuple[str, str, str, int]:
    return fmt(s.mse), fmt(s.rmse), fmt(s.mean_dist), s.frames


def write_report(path: str | Path, report: MseReport) -> Path:
    return _write(path, REPORT_COLUMNS, ((name, *_stats_row(s)) for name, s in report.stages.items()))


def write_camera_report(path: str | Path, report: MseReport) -> Path:
    return _write(
        path,
        CAMERA_REPORT_COLUMNS,
        ((stage, camera, *_stats_row(s)) for (stage, camera), s in report.cameras.items()),
    )


def write_per_frame(path: str | Path, report: MseReport) -> Path:
    return _write(
        path,
        PER_FRAME_COLUMNS,
        ((f, stage, fmt(e)) for stage, series in report.per_frame.items() for f, e in series),
    )


def _read_stats(rows: _Rows, record: Mapping[str, str]) -> ErrorStats:
    return ErrorStats(
        mse=rows.number(record, "mse"),
        rmse=rows.number(record, "rmse"),
        mean_dist=rows.number(record, "mean_dist"),
        frames=rows.integer(record, "frames", minimum=1),
    )


def read_report(path: str | Path) -> MseReport:
    rows = _Rows(Path(path), REPORT_COLUMNS)
    report = MseReport()
    for record in rows:
        report.stages[record["stage"]] = _read_stats(rows, record)
    return report


def read_camera_report(path: str | Path) -> dict[tuple[str, str], ErrorStats]:
    rows = _Rows(Path(path), CAMERA_REPORT_COLUMNS)
    return {(record["stage"], record["camera"]): _read_stats(rows, record) for record in rows}


def read_per_frame(path: str | Path) -> dict[str, list[tuple[int, float]]]:
    rows = _Rows(Path(path), PER_FRAME_COLUMNS)
    out: dict[str, list[tuple[int, float]]] = {}
    for record in rows:
        out.setdefault(record["stage"], []).append(
            (rows.integer(record, "frame", minimum=0), rows.number(record, "sq_error"))
        )
    return out
