"""
PATH: tests/test_scenario.py
PURPOSE: Tests for the seeded multi-camera scene simulator.
"""

import numpy as np
import pytest

from multicam_fusion.core import Homography, Point2
from multicam_fusion.estimation import MotionKind
from multicam_fusion.scenario import (
    CameraSpec,
    MissSpec,
    ScenarioConfig,
    TruthSpec,
    simulate,
    truth_trajectory,
)

CV_TRUTH = TruthSpec(MotionKind.CONSTANT_VELOCITY, position=(0.0, 0.0), velocity=(1.0, 0.0))


def _centroids(detections):
    return [(d.frame, d.bbox.cx, d.bbox.cy) for d in detections]


class TestTruth:
    """Tests for exact iteration of the motion equations."""

    def test_cv_line(self):
        """Test CV truth from (0,0) with v=(1,0) over 5 frames."""
        cfg = ScenarioConfig(frames=5, cameras=(CameraSpec("a"), CameraSpec("b")), truth=CV_TRUTH)
        out = simulate(cfg)
        assert [out.gt_base[f] for f in range(5)] == [Point2(f, 0) for f in range(5)]
        for camera in ("a", "b"):
            assert _centroids(out.detections[camera]) == [(f, float(f), 0.0) for f in range(5)]

    def test_ca_parabola(self):
        """Test CA truth with a=(2,0): positions 0, 1, 4, 9."""
        truth = TruthSpec(MotionKind.CONSTANT_ACCELERATION, velocity=(0.0, 0.0), acceleration=(2.0, 0.0))
        gt = truth_trajectory(truth, 4)
        assert [gt[f] for f in range(4)] == [Point2(0, 0), Point2(1, 0), Point2(4, 0), Point2(9, 0)]

    def test_gt_has_every_frame(self):
        """Test that ground truth covers exactly the configured frames."""
        out = simulate(ScenarioConfig(frames=17, cameras=(CameraSpec("a", noise_sigma=3.0),), truth=CV_TRUTH))
        assert sorted(out.gt_base) == list(range(17))

    def test_projection_per_camera(self):
        """Test that per-camera ground truth is the base truth through the camera map."""
        h = Homography(((1, 0, 10), (0, 1, -5), (0, 0, 1)))
        out = simulate(ScenarioConfig(frames=3, cameras=(CameraSpec("a", homography=h),), truth=CV_TRUTH))
        assert out.gt_per_camera["a"][2] == Point2(12, -5)
        assert out.to_base()["a"] == h.inverse()


class TestMisses:
    """Tests for occlusion windows and random misses."""

    def test_occlusion_window_on_one_camera(self):
        """Test that window [10, 12] on front removes frames 10-12 from front only."""
        cfg = ScenarioConfig(
            frames=20,
            cameras=(CameraSpec("corridor"), CameraSpec("front", miss=MissSpec(windows=((10, 12),)))),
            truth=CV_TRUTH,
        )
        out = simulate(cfg)
        front = [d.frame for d in out.detections["front"]]
        corridor = [d.frame for d in out.detections["corridor"]]
        assert front == [f for f in range(20) if f not in (10, 11, 12)]
        assert corridor == list(range(20))

    def test_miss_fraction(self):
        """Test the empirical hole fraction against the binomial spread."""
        p, frames = 0.2, 20_000
        cfg = ScenarioConfig(frames=frames, cameras=(CameraSpec("a", miss=MissSpec(p)),), seed=11)
        holes = frames - len(simulate(cfg).detections["a"])
        sd = (p * (1 - p) / frames) ** 0.5
        assert abs(holes / frames - p) <= 3 * sd

    def test_detections_never_inside_a_miss(self):
        """Test that every detection frame is in range and outside the occlusion."""
        miss = MissSpec(0.3, windows=((5, 9),))
        out = simulate(ScenarioConfig(frames=40, cameras=(CameraSpec("a", miss=miss),), seed=3))
        for d in out.detections["a"]:
            assert 0 <= d.frame < 40
            assert not miss.occluded(d.frame)


class TestNoise:
    """Tests for the Gaussian centroid noise."""

    def test_zero_sigma_is_exact(self):
        """Test that σ=0 with the identity map reproduces ground truth exactly."""
        out = simulate(ScenarioConfig(frames=30, cameras=(CameraSpec("a"),), truth=CV_TRUTH, seed=9))
        for d in out.detections["a"]:
            assert Point2(d.bbox.cx, d.bbox.cy) == out.gt_base[d.frame]

    def test_empirical_sigma(self):
        """Test that the per-axis sample std-dev is within 5% of σ=3 over 10⁴ samples."""
        out = simulate(ScenarioConfig(frames=10_000, cameras=(CameraSpec("a", noise_sigma=3.0),), seed=1))
        dx = [d.bbox.cx - out.gt_base[d.frame].x for d in out.detections["a"]]
        dy = [d.bbox.cy - out.gt_base[d.frame].y for d in out.detections["a"]]
        assert np.std(dx, ddof=1) == pytest.approx(3.0, rel=0.05)
        assert np.std(dy, ddof=1) == pytest.approx(3.0, rel=0.05)


class TestDeterminism:
    """Tests for the documented seed-to-stream mapping."""

    def _cfg(self, seed: int) -> ScenarioConfig:
        return ScenarioConfig(
            frames=50,
            cameras=(
                CameraSpec("a", noise_sigma=3.0, miss=MissSpec(0.1)),
                CameraSpec("b", noise_sigma=2.0, miss=MissSpec(0.1)),
            ),
            truth=CV_TRUTH,
            seed=seed,
        )

    def test_same_seed_same_output(self):
        """Test bitwise-identical output for a repeated seed."""
        assert simulate(self._cfg(5)) == simulate(self._cfg(5))

    def test_different_seed_differs(self):
        """Test that another seed changes the noise."""
        assert simulate(self._cfg(5)).detections != simulate(self._cfg(6)).detections

    def test_seed_mapping(self):
        """Test that camera i draws noise then misses from the i-th spawned child stream."""
        out = simulate(self._cfg(5))
        children = np.random.SeedSequence(5).spawn(2)
        rng = np.random.default_rng(children[1])
        noise = 2.0 * rng.standard_normal(size=(50, 2))
        kept = [f for f, u in enumerate(rng.random(50)) if u >= 0.1]
        b = out.detections["b"]
        assert [d.frame for d in b] == kept
        for d in b:
            gt = out.gt_per_camera["b"][d.frame]
            assert d.bbox.cx == gt.x + float(noise[d.frame, 0])
            assert d.bbox.cy == gt.y + float(noise[d.frame, 1])


class TestValidation:
    """Tests for scenario configuration invariants."""

    def test_too_few_frames(self):
        """Test that fewer than 2 frames is refused."""
        with pytest.raises(ValueError):
            ScenarioConfig(frames=1, cameras=(CameraSpec("a"),))

    def test_window_out_of_range(self):
        """Test that an occlusion window past the last frame is refused."""
        with pytest.raises(ValueError, match="outside"):
            ScenarioConfig(frames=10, cameras=(CameraSpec("a", miss=MissSpec(windows=((5, 10),))),))

    def test_negative_sigma(self):
        """Test that a negative σ is refused."""
        with pytest.raises(ValueError):
            CameraSpec("a", noise_sigma=-1.0)

    def test_probability_range(self):
        """Test that a miss probability of 1 is refused."""
        with pytest.raises(ValueError):
            MissSpec(1.0)

    def test_duplicate_camera(self):
        """Test that repeated camera ids are refused."""
        with pytest.raises(ValueError, match="duplicate"):
            ScenarioConfig(frames=5, cameras=(CameraSpec("a"), CameraSpec("a")))
