"""
PATH: tests/test_tracking.py
PURPOSE: Tests for association, the per-camera tracker and multi-camera tracking.
"""

import pytest

from multicam_fusion.core import BBox, Detection, Point2
from multicam_fusion.errors import UnsortedInputError
from multicam_fusion.tracking import TrackerConfig, associate, run_tracker, track_cameras


def _det(frame: int, x: float, y: float, camera: str = "cam") -> Detection:
    return Detection(frame=frame, camera=camera, bbox=BBox(x, y, 40, 100))


def _line(frames, camera: str = "cam", start=(100.0, 200.0), velocity=(2.0, 0.5)) -> list[Detection]:
    return [_det(f, start[0] + velocity[0] * f, start[1] + velocity[1] * f, camera) for f in frames]


class TestAssociate:
    """Tests for greedy nearest-neighbour association."""

    def test_inside_gate(self):
        """Test that a detection 2 px away is assigned."""
        a = associate([(0, Point2(10, 10))], [_det(0, 12, 10)], gate=50)
        assert a.matches == {0: 0}
        assert a.unmatched_detections == ()

    def test_outside_gate(self):
        """Test that a detection 127 px away stays unassigned."""
        a = associate([(0, Point2(10, 10))], [_det(0, 100, 100)], gate=50)
        assert a.matches == {}
        assert a.unmatched_tracks == (0,)
        assert a.unmatched_detections == (0,)

    def test_greedy_pairs_nearest_first(self):
        """Test that two tracks and two detections pair up by ascending distance."""
        a = associate(
            [(0, Point2(0, 0)), (1, Point2(10, 0))],
            [_det(0, 9, 0), _det(0, 1, 0)],
            gate=50,
        )
        assert a.matches == {0: 1, 1: 0}

    def test_tie_goes_to_lower_track_id(self):
        """Test that equidistant tracks resolve to the lower id."""
        a = associate([(4, Point2(-1, 0)), (2, Point2(1, 0))], [_det(0, 0, 0)], gate=5)
        assert a.matches == {2: 0}
        assert a.unmatched_tracks == (4,)

    def test_tie_goes_to_earlier_detection(self):
        """Test that equidistant detections resolve to the earlier one."""
        a = associate([(0, Point2(0, 0))], [_det(0, 0, 3), _det(0, 3, 0)], gate=5)
        assert a.matches == {0: 0}
        assert a.unmatched_detections == (1,)

    def test_mixed_frames_refused(self):
        """Test that detections from several frames are refused."""
        with pytest.raises(ValueError):
            associate([(0, Point2(0, 0))], [_det(0, 0, 0), _det(1, 0, 0)], gate=5)

    def test_no_tracks(self):
        """Test that every detection is unassigned when there are no tracks."""
        a = associate([], [_det(0, 0, 0), _det(0, 5, 5)], gate=5)
        assert a.unmatched_detections == (0, 1)


class TestRunTracker:
    """Tests for the single-camera tracker."""

    def test_continuous_stream(self):
        """Test that an unbroken stream yields one fully updated track."""
        tracks = run_tracker(_line(range(20)), TrackerConfig())
        assert len(tracks) == 1
        assert len(tracks[0]) == 20
        assert all(tp.updated for tp in tracks[0])

    def test_hole_is_bridged(self):
        """Test that a 3-frame hole gives 3 consecutive predict-only points."""
        frames = [f for f in range(20) if f not in (8, 9, 10)]
        tracks = run_tracker(_line(frames), TrackerConfig())
        assert len(tracks) == 1
        track = tracks[0]
        assert [tp.frame for tp in track] == list(range(20))
        assert [track.at(f).updated for f in (7, 8, 9, 10, 11)] == [True, False, False, False, True]
        assert [track.at(f).misses for f in (8, 9, 10, 11)] == [1, 2, 3, 0]
        assert track.at(9).measurement is None
        assert track.at(11).measurement == Point2(100.0 + 22.0, 200.0 + 5.5)

    def test_noiseless_converges_to_centroids(self):
        """Test that a noiseless CV stream is followed to within 1e-9 once the velocity has settled."""
        detections = _line(range(120))
        tracks = run_tracker(detections, TrackerConfig())
        track = tracks[0]
        for det in detections[60:]:
            tp = track.at(det.frame)
            assert tp.point.x == pytest.approx(det.bbox.cx, abs=1e-9)
            assert tp.point.y == pytest.approx(det.bbox.cy, abs=1e-9)

    def test_termination_after_max_misses(self):
        """Test that a track dies once misses exceed max_misses, without emitting the fatal miss."""
        cfg = TrackerConfig(max_misses=5)
        detections = _line(range(10)) + [_det(30, 500, 500)]
        tracks = run_tracker(detections, cfg)
        first = tracks[0]
        assert first.last_frame == 9 + 5
        assert first.points[-1].misses == 5
        assert tracks[1].first_frame == 30

    def test_predict_only_points_match_misses_through_death_and_rebirth(self):
        """Test that each track's predict-only points add up to the misses it accumulated."""
        cfg = TrackerConfig(max_misses=3)
        detections = _line([*range(10), *range(20, 24), *range(26, 30)])
        tracks = run_tracker(detections, cfg)
        assert [t.id for t in tracks] == [0, 1]
        assert tracks[0].last_frame == 12
        assert tracks[1].first_frame == 20

        for track in tracks:
            previous = 0
            run_totals = []
            for point in track.points:
                assert point.misses == (0 if point.updated else previous + 1)
                if point.updated and previous:
                    run_totals.append(previous)
                previous = point.misses
            if previous:
                run_totals.append(previous)
            assert sum(not p.updated for p in track.points) == sum(run_totals)

        assert [sum(not p.updated for p in t.points) for t in tracks] == [3, 2]

    def test_far_detection_births_track(self):
        """Test that a detection outside the gate starts a second track."""
        detections = _line(range(5)) + [_det(5, 110.0, 202.5), _det(5, 900.0, 900.0)]
        detections.sort(key=lambda d: d.frame)
        tracks = run_tracker(detections, TrackerConfig())
        assert [t.id for t in tracks] == [0, 1]
        assert tracks[1].first_frame == 5

    def test_unsorted_input(self):
        """Test that a decreasing frame raises UnsortedInputError."""
        with pytest.raises(UnsortedInputError):
            run_tracker([_det(3, 0, 0), _det(2, 0, 0)], TrackerConfig())

    def test_empty_stream(self):
        """Test that no detections give no tracks."""
        assert run_tracker([], TrackerConfig()) == []

    def test_deterministic(self):
        """Test that identical input gives identical tracks."""
        detections = _line([f for f in range(40) if f % 7])
        assert run_tracker(detections, TrackerConfig()) == run_tracker(detections, TrackerConfig())

    def test_config_validation(self):
        """Test that a non-positive gate or max_misses is refused."""
        with pytest.raises(ValueError):
            TrackerConfig(gate_radius=0)
        with pytest.raises(ValueError):
            TrackerConfig(max_misses=0)


class TestTrackCameras:
    """Tests for per-camera tracking, serial and threaded."""

    def test_parallel_matches_serial(self):
        """Test that the thread pool gives the same tracks in camera order."""
        streams = {
            "front": _line(range(30), camera="front"),
            "corridor": _line(range(30), camera="corridor", start=(0.0, 0.0)),
        }
        serial = track_cameras(streams, TrackerConfig())
        threaded = track_cameras(streams, TrackerConfig(), parallel=True)
        assert list(threaded) == ["front", "corridor"]
        assert threaded == serial
        assert threaded["front"][0].camera == "front"
