"""
PATH: tests/test_acceptance.py
PURPOSE: End-to-end acceptance checks: oracle equivalence of the filter, statistical
         ordering raw > filtered > fused on simulated scenes, exactness on matched
         dynamics, winner-take-all purity, miss-threshold switching, invariants,
         determinism and CSV round trips.

WHY: Real footage with ground truth is not available, so the simulator is the
     oracle. Statistical checks use fixed seed ranges and fail deterministically.
"""

import dataclasses
import math

import numpy as np
import pytest

from multicam_fusion import csvio
from multicam_fusion.cli import main
from multicam_fusion.config import load_preset
from multicam_fusion.core import Point2, centroid
from multicam_fusion.estimation import (
    FilterState,
    MotionKind,
    MotionModel,
    NoiseConfig,
    init_filter,
    position,
    predict,
    step,
    transition_matrix,
    update,
)
from multicam_fusion.evaluation import mse, pooled_mse
from multicam_fusion.fusion import (
    CameraSample,
    CameraScore,
    FusionConfig,
    FusionMethod,
    build_camera_view,
    fuse_run,
    fuse_weighted,
    rank_cameras,
)
from multicam_fusion.scenario import CameraSpec, MissSpec, ScenarioConfig, TruthSpec, simulate, truth_trajectory
from multicam_fusion.tracking import track_cameras

SEEDS = range(100)


def _views(output, tracker):
    tracks = track_cameras(output.detections, tracker)
    to_base = output.to_base()
    return {camera: build_camera_view(camera, tracks[camera], to_base[camera]) for camera in tracks}


def _with_seed(loaded, seed):
    return dataclasses.replace(loaded.scenario, seed=seed)


# ---------------------------------------------------------------------------
# Dense list-of-lists oracle, written from the textbook equations
# ---------------------------------------------------------------------------


def _mm(A, B):
    return [[math.fsum(A[i][k] * B[k][j] for k in range(len(B))) for j in range(len(B[0]))] for i in range(len(A))]


def _t(A):
    return [list(row) for row in zip(*A)]


def _sym(A):
    return [[(A[i][j] + A[j][i]) / 2 for j in range(len(A))] for i in range(len(A))]


def _oracle_transition(kind, dt):
    # position += v·dt (+ a·dt²/2); velocity += a·dt
    n = 4 if kind is MotionKind.CONSTANT_VELOCITY else 6
    F = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
    F[0][2] = F[1][3] = dt
    if n == 6:
        F[0][4] = F[1][5] = dt * dt / 2
        F[2][4] = F[3][5] = dt
    return F


def _oracle_step(x, P, F, q, r, z):
    n = len(x)
    xp = [math.fsum(F[i][k] * x[k] for k in range(n)) for i in range(n)]
    Pp = _mm(_mm(F, P), _t(F))
    Pp = _sym([[Pp[i][j] + (q if i == j else 0.0) for j in range(n)] for i in range(n)])

    s00, s01, s10, s11 = Pp[0][0] + r, Pp[0][1], Pp[1][0], Pp[1][1] + r
    det = s00 * s11 - s01 * s10
    S_inv = [[s11 / det, -s01 / det], [-s10 / det, s00 / det]]
    K = _mm([[Pp[i][0], Pp[i][1]] for i in range(n)], S_inv)
    y = [z[0] - xp[0], z[1] - xp[1]]
    xu = [xp[i] + K[i][0] * y[0] + K[i][1] * y[1] for i in range(n)]
    Pu = _sym([[Pp[i][j] - K[i][0] * Pp[0][j] - K[i][1] * Pp[1][j] for j in range(n)] for i in range(n)])
    return xu, Pu


def _random_psd(rng, n):
    A = rng.normal(size=(n, n))
    P = A @ A.T + 0.1 * np.eye(n)
    return (P + P.T) / 2


class TestRiccatiOracle:
    """Predict/update against an independent dense implementation."""

    def test_random_steps_match(self):
        """Test 200 random predict∘update steps on both models within 1e-9."""
        rng = np.random.default_rng(2024)
        for i in range(200):
            kind = MotionKind.CONSTANT_VELOCITY if i % 2 == 0 else MotionKind.CONSTANT_ACCELERATION
            model = MotionModel(kind, dt=float(rng.choice([0.5, 1.0, 2.0])))
            noise = NoiseConfig(q_scale=float(rng.uniform(0.5, 2.0)), r_scale=float(rng.uniform(0.5, 2.0)))
            x = rng.normal(scale=10.0, size=model.dim)
            P = _random_psd(rng, model.dim)
            z = Point2(*(rng.normal(scale=10.0, size=2)))

            got = update(predict(FilterState(x=x, P=P, model=model, noise=noise)), z)
            F = _oracle_transition(kind, model.dt)
            xo, Po = _oracle_step(x.tolist(), P.tolist(), F, noise.q_scale, noise.r_scale, (z.x, z.y))

            np.testing.assert_allclose(got.x, xo, rtol=0, atol=1e-9)
            np.testing.assert_allclose(got.P, Po, rtol=0, atol=1e-9)

    def test_library_transition_matches_oracle(self):
        """Test that the library F equals the oracle F for both models."""
        for kind in MotionKind:
            for dt in (0.5, 1.0, 2.0):
                np.testing.assert_array_equal(
                    transition_matrix(MotionModel(kind, dt)), _oracle_transition(kind, dt)
                )


class TestFilteringImproves:
    """Filtered error below raw detection error on the corridor/front scene."""

    def test_filtered_beats_raw(self):
        """Test MSE(filtered) < MSE(raw) in at least 95 of 100 seeds (σ=3, 5% misses)."""
        loaded = load_preset("paper-shaped")
        cameras = tuple(dataclasses.replace(c, miss=MissSpec(0.05)) for c in loaded.scenario.cameras)
        wins = 0
        for seed in SEEDS:
            scenario = dataclasses.replace(loaded.scenario, cameras=cameras, seed=seed)
            output = simulate(scenario)
            views = _views(output, loaded.tracker)
            raw = pooled_mse({c: v.raw for c, v in views.items()}, output.gt_base).mse
            filtered = pooled_mse({c: v.filtered() for c, v in views.items()}, output.gt_base).mse
            wins += filtered < raw
        assert wins >= 95


class TestFusionImproves:
    """Equal cameras, equal weights: raw > filtered > weighted fusion."""

    def test_ordering(self):
        """Test the mean ordering and fused < each camera's filtered error in ≥ 90 of 100 seeds."""
        loaded = load_preset("equal-pair")
        raw_sum = filtered_sum = fused_sum = 0.0
        fused_wins = 0
        for seed in SEEDS:
            output = simulate(_with_seed(loaded, seed))
            views = _views(output, loaded.tracker)
            gt = output.gt_base
            raw_sum += pooled_mse({c: v.raw for c, v in views.items()}, gt).mse
            filtered_sum += pooled_mse({c: v.filtered() for c, v in views.items()}, gt).mse
            fused = mse(fuse_run(list(views.values()), loaded.fusion, FusionMethod.WEIGHTED), gt).mse
            fused_sum += fused
            fused_wins += all(fused < mse(v.filtered(), gt).mse for v in views.values())
        assert raw_sum > filtered_sum > fused_sum
        assert fused_wins >= 90


class TestMatchedDynamics:
    """Noiseless constant-acceleration truth followed exactly through an occlusion."""

    def test_exact_through_gap(self):
        """Test that a CA filter started on the true state equals truth within 1e-9 at every frame."""
        truth = TruthSpec(
            MotionKind.CONSTANT_ACCELERATION,
            position=(10.0, -4.0),
            velocity=(1.0, 2.0),
            acceleration=(0.1, -0.05),
        )
        scenario = ScenarioConfig(
            frames=100,
            cameras=(CameraSpec("cam", miss=MissSpec(windows=((50, 54),))),),
            truth=truth,
            seed=3,
        )
        output = simulate(scenario)
        gt = truth_trajectory(truth, 100)
        measured = {d.frame: centroid(d.bbox) for d in output.detections["cam"]}
        assert not set(range(50, 55)) & set(measured)

        s = FilterState(x=truth.initial_state(), P=np.eye(6), model=MotionModel(MotionKind.CONSTANT_ACCELERATION))
        for frame in range(1, 100):
            s = step(s, measured.get(frame))
            p = position(s)
            assert p.x == pytest.approx(gt[frame].x, abs=1e-9)
            assert p.y == pytest.approx(gt[frame].y, abs=1e-9)
        assert s.misses == 0


class TestMissGap:
    """Constant velocity extrapolates a gap better than constant acceleration."""

    def test_cv_beats_ca_at_gap_end(self):
        """Test CV gap-end error ≤ CA gap-end error in ≥ 80% of 200 seeds (30 updates, 20-frame gap)."""
        truth = TruthSpec(MotionKind.CONSTANT_VELOCITY, position=(100.0, 200.0), velocity=(2.0, 0.5))
        cv_wins = 0
        for seed in range(200):
            scenario = ScenarioConfig(
                frames=51,
                cameras=(CameraSpec("cam", noise_sigma=3.0, miss=MissSpec(windows=((31, 50),))),),
                truth=truth,
                seed=seed,
            )
            output = simulate(scenario)
            first, *_ = output.detections["cam"]
            measured = {d.frame: centroid(d.bbox) for d in output.detections["cam"]}
            errors = {}
            for kind in MotionKind:
                s = init_filter(first, MotionModel(kind))
                for frame in range(1, 51):
                    s = step(s, measured.get(frame))
                assert s.misses == 20
                errors[kind] = position(s).distance_to(output.gt_base[50])
            cv_wins += errors[MotionKind.CONSTANT_VELOCITY] <= errors[MotionKind.CONSTANT_ACCELERATION]
        assert cv_wins >= 160


class TestWinnerTakeAllPurity:
    """Every winner-take-all point is one camera's point, never a blend."""

    def test_points_are_inputs(self):
        """Test bit-identity with the selected camera's filtered point on every frame."""
        loaded = load_preset("paper-shaped")
        views = _views(simulate(loaded.scenario), loaded.tracker)
        fused = fuse_run(list(views.values()), loaded.fusion, FusionMethod.WTA)
        assert fused.points
        previous = None
        for p in fused.points:
            if p.carried:
                assert p.point == previous
            else:
                assert p.point == views[p.source].samples[p.frame].point
            previous = p.point


class TestSwitchingScenario:
    """Front camera lost from frame 120; weighted fusion hands over to the corridor camera."""

    def test_full_weight_after_threshold(self):
        """Test fused == corridor filtered point, bit for bit, from frame 123 on."""
        loaded = load_preset("paper-shaped")
        views = _views(simulate(loaded.scenario), loaded.tracker)
        fused = fuse_run(list(views.values()), loaded.fusion, FusionMethod.WEIGHTED).trajectory()
        corridor = views["corridor"].samples
        for frame in range(123, loaded.scenario.frames):
            assert fused[frame] == corridor[frame].point

    def test_switching_lowers_error(self):
        """Test that switching lowers the run MSE on average and in most of 20 seeds."""
        loaded = load_preset("paper-shaped")
        unswitched = dataclasses.replace(loaded.fusion, switching=False)
        with_sum = without_sum = 0.0
        wins = 0
        for seed in range(30, 50):
            output = simulate(_with_seed(loaded, seed))
            views = list(_views(output, loaded.tracker).values())
            with_switch = mse(fuse_run(views, loaded.fusion, FusionMethod.WEIGHTED), output.gt_base).mse
            without_switch = mse(fuse_run(views, unswitched, FusionMethod.WEIGHTED), output.gt_base).mse
            with_sum += with_switch
            without_sum += without_switch
            wins += with_switch < without_switch
        assert with_sum < without_sum
        assert wins >= 14


class TestInvariantSuite:
    """Randomised invariants over filter, fusion and metric."""

    def test_covariance_symmetric_psd(self):
        """Test symmetry and PSD of P over 1200 random steps."""
        rng = np.random.default_rng(7)
        s = None
        for i in range(1200):
            if i % 50 == 0:
                kind = MotionKind.CONSTANT_VELOCITY if rng.random() < 0.5 else MotionKind.CONSTANT_ACCELERATION
                model = MotionModel(kind)
                noise = NoiseConfig(q_scale=float(rng.uniform(0.1, 3)), r_scale=float(rng.uniform(0.1, 3)))
                s = FilterState(x=rng.normal(size=model.dim), P=_random_psd(rng, model.dim), model=model, noise=noise)
            z = None if rng.random() < 0.2 else Point2(*(np.asarray(s.x[:2]) + rng.normal(scale=3.0, size=2)))
            s = step(s, z)
            np.testing.assert_allclose(s.P, s.P.T, rtol=0, atol=1e-9)
            assert np.linalg.eigvalsh(s.P).min() >= -1e-9

    def test_predict_is_affine(self):
        """Test predicted position of a·x₁ + (1−a)·x₂ equals the same combination of predictions."""
        rng = np.random.default_rng(8)
        for kind in MotionKind:
            model = MotionModel(kind)
            P = np.eye(model.dim)
            for _ in range(100):
                x1, x2 = rng.normal(scale=10, size=(2, model.dim))
                a = float(rng.uniform(-1, 2))
                mixed = position(predict(FilterState(x=a * x1 + (1 - a) * x2, P=P, model=model)))
                p1 = position(predict(FilterState(x=x1, P=P, model=model)))
                p2 = position(predict(FilterState(x=x2, P=P, model=model)))
                assert mixed.x == pytest.approx(a * p1.x + (1 - a) * p2.x, abs=1e-9)
                assert mixed.y == pytest.approx(a * p1.y + (1 - a) * p2.y, abs=1e-9)

    def test_matrices_are_motion_equations(self):
        """Test H·F·x against r0 + v·dt (+ a·dt²/2) for random states."""
        rng = np.random.default_rng(9)
        for _ in range(200):
            dt = float(rng.uniform(0.1, 3))
            x = rng.normal(size=6)
            cv = transition_matrix(MotionModel(MotionKind.CONSTANT_VELOCITY, dt)) @ x[:4]
            ca = transition_matrix(MotionModel(MotionKind.CONSTANT_ACCELERATION, dt)) @ x
            np.testing.assert_allclose(cv[:2], x[:2] + x[2:4] * dt, atol=1e-12)
            np.testing.assert_allclose(ca[:2], x[:2] + x[2:4] * dt + x[4:6] * dt * dt / 2, atol=1e-12)

    def test_weighted_convexity(self):
        """Test that 1000 random fusions land on the weighted mean inside the points' bounding box."""
        rng = np.random.default_rng(10)
        for _ in range(1000):
            k = int(rng.integers(2, 5))
            cameras = [f"c{i}" for i in range(k)]
            weights = rng.dirichlet(np.ones(k))
            points = rng.uniform(-100, 100, size=(k, 2))
            cfg = FusionConfig(weights=dict(zip(cameras, map(float, weights))))
            samples = [CameraSample(c, Point2(*p), True) for c, p in zip(cameras, points)]
            fused = fuse_weighted(samples, cfg)
            expected = (weights[:, None] * points).sum(axis=0) / weights.sum()
            assert fused.x == pytest.approx(expected[0], abs=1e-9)
            assert fused.y == pytest.approx(expected[1], abs=1e-9)
            assert points[:, 0].min() - 1e-9 <= fused.x <= points[:, 0].max() + 1e-9
            assert points[:, 1].min() - 1e-9 <= fused.y <= points[:, 1].max() + 1e-9

    def test_wta_scale_invariance(self):
        """Test that scaling every score by a positive constant keeps the winner."""
        rng = np.random.default_rng(11)
        for _ in range(1000):
            k = int(rng.integers(2, 6))
            scores = rng.random(k)
            spreads = rng.uniform(0, 10, size=k)
            factor = float(rng.uniform(1e-3, 1e3))
            base = [CameraScore(f"c{i}", float(s), float(m)) for i, (s, m) in enumerate(zip(scores, spreads))]
            scaled = [dataclasses.replace(c, score=c.score * factor) for c in base]
            assert rank_cameras(base)[0].camera == rank_cameras(scaled)[0].camera

    def test_metric_properties(self):
        """Test zero-iff-identical, symmetry, translation invariance and k² scaling on random data."""
        rng = np.random.default_rng(12)
        for _ in range(200):
            n = int(rng.integers(1, 40))
            a = {f: Point2(*xy) for f, xy in enumerate(rng.uniform(-500, 500, size=(n, 2)))}
            b = {f: Point2(*xy) for f, xy in enumerate(rng.uniform(-500, 500, size=(n, 2)))}
            d = rng.uniform(-100, 100, size=2)
            k = float(rng.uniform(0.1, 10))
            value = mse(a, b).mse
            assert value > 0.0
            assert mse(a, a).mse == 0.0
            assert mse(b, a).mse == value
            shifted = mse({f: Point2(p.x + d[0], p.y + d[1]) for f, p in a.items()},
                          {f: Point2(p.x + d[0], p.y + d[1]) for f, p in b.items()}).mse
            assert shifted == pytest.approx(value, rel=1e-9)
            scaled = mse({f: Point2(p.x * k, p.y * k) for f, p in a.items()},
                         {f: Point2(p.x * k, p.y * k) for f, p in b.items()}).mse
            assert scaled == pytest.approx(k * k * value, rel=1e-9)


class TestDeterminismAndRoundTrip:
    """CLI reruns are byte-identical and every emitted CSV re-ingests."""

    def _reingest(self, directory):
        for path in sorted(directory.glob("*.csv")):
            name = path.name
            if name.startswith("detections_"):
                csvio.read_detections(path)
            elif name.startswith("gt"):
                csvio.read_ground_truth(path)
            elif name.startswith("tracks_"):
                csvio.read_tracks(path, name.removeprefix("tracks_").removesuffix(".csv"))
            elif name.startswith("fused_"):
                csvio.read_fused(path, name.removeprefix("fused_").removesuffix(".csv"))
            elif name == "report.csv":
                csvio.read_report(path)
            elif name == "report_cameras.csv":
                csvio.read_camera_report(path)
            elif name == "per_frame.csv":
                csvio.read_per_frame(path)
            else:
                csvio.read_trajectory(path)

    def test_simulate_and_pipeline_reruns(self, tmp_path):
        """Test byte-identical scenes and reports for seed 42, and clean re-ingestion."""
        for name in ("a", "b"):
            assert main(["simulate", "--seed", "42", "--out", str(tmp_path / name)]) == 0
            scene = tmp_path / name
            assert main(["pipeline", "--config", str(scene / "run.yaml"), "--out", str(scene / "results")]) == 0

        for relative in ("", "results"):
            first, second = tmp_path / "a" / relative, tmp_path / "b" / relative
            files = sorted(p.name for p in first.iterdir() if p.is_file())
            assert files == sorted(p.name for p in second.iterdir() if p.is_file())
            for name in files:
                assert (first / name).read_bytes() == (second / name).read_bytes(), name
            self._reingest(first)
