#!/usr/bin/env python3
"""
PATH: experiments/run_benchmarks.py
PURPOSE: Seed sweeps over the simulator: filtering gain, fusion gain, miss-threshold
         switching and CV-vs-CA extrapolation through a detection gap.

USAGE:
    python experiments/run_benchmarks.py --seeds 100 --output results/

FLOW:
┌──────────────────────┐   ┌──────────────────────────┐   ┌──────────────────────────┐
│ Preset + seed range  │──▶│ simulate → track → fuse  │──▶│ MSE per stage, JSON + MD │
└──────────────────────┘   └──────────────────────────┘   └──────────────────────────┘

DEPENDENCIES:
- multicam_fusion
- numpy
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from multicam_fusion.config import ScenarioFile, load_preset
from multicam_fusion.core import centroid
from multicam_fusion.estimation import MotionKind, MotionModel, init_filter, position, step
from multicam_fusion.evaluation import mse, staged_report
from multicam_fusion.fusion import CameraView, FusionMethod, build_camera_view, fuse_run
from multicam_fusion.scenario import CameraSpec, MissSpec, ScenarioConfig, ScenarioOutput, TruthSpec, simulate
from multicam_fusion.tracking import track_cameras

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s [%(levelname)s] %(message)s",
)
logger = logging.getLogger(__name__)


# ============================================================================
# CONFIGURATION
# ============================================================================

@dataclass
class ExperimentConfig:
    """Configuration for the seed sweeps."""

    experiments: list[str] = field(default_factory=lambda: ["filtering", "fusion", "switching", "gap"])
    n_seeds: int = 100
    first_seed: int = 0
    output_dir: str = "./results"

    # detection gap sweep
    gap_lengths: list[int] = field(default_factory=lambda: [5, 10, 20, 40])
    gap_updates: int = 30
    gap_noise_sigma: float = 3.0


@dataclass
class SweepResult:
    """Per-seed values of one experiment plus their summary."""

    experiment: str
    preset: str
    seeds: list[int]
    values: dict[str, list[float]]
    wins: dict[str, int] = field(default_factory=dict)
    elapsed_seconds: float = 0.0

    def means(self) -> dict[str, float]:
        return {name: float(np.mean(v)) for name, v in self.values.items()}

    def to_dict(self) -> dict[str, Any]:
        return {
            "experiment": self.experiment,
            "preset": self.preset,
            "seeds": self.seeds,
            "means": self.means(),
            "wins": self.wins,
            "values": self.values,
            "elapsed_seconds": self.elapsed_seconds,
        }


# ============================================================================
# HELPERS
# ============================================================================

def camera_views(loaded: ScenarioFile, output: ScenarioOutput) -> dict[str, CameraView]:
    tracks = track_cameras(output.detections, loaded.tracker)
    to_base = output.to_base()
    return {camera: build_camera_view(camera, tracks[camera], to_base[camera]) for camera in tracks}


def with_seed(loaded: ScenarioFile, seed: int) -> ScenarioFile:
    return dataclasses.replace(loaded, scenario=dataclasses.replace(loaded.scenario, seed=seed))


# ============================================================================
# EXPERIMENTS
# ============================================================================

class ExperimentRunner:
    """Runs the configured sweeps and writes results."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.output_dir = Path(config.output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.seeds = list(range(config.first_seed, config.first_seed + config.n_seeds))
        self.results: list[SweepResult] = []

    def run(self) -> list[SweepResult]:
        logger.info(f"Running {self.config.experiments} over {len(self.seeds)} seeds")
        for name in self.config.experiments:
            start = time.time()
            result = getattr(self, f"_run_{name}")()
            result.elapsed_seconds = time.time() - start
            logger.info(f"  {name}: means {_rounded(result.means())}, wins {result.wins}")
            self.results.append(result)
        self._save_results()
        self._print_summary()
        return self.results

    def _staged_sweep(self, experiment: str, loaded: ScenarioFile) -> SweepResult:
        values: dict[str, list[float]] = {stage: [] for stage in ("raw", "filtered", "weighted", "wta")}
        for camera in loaded.fusion.weights:
            values[f"filtered[{camera}]"] = []
        for seed in self.seeds:
            case = with_seed(loaded, seed)
            output = simulate(case.scenario)
            views = camera_views(case, output)
            fused = {method: fuse_run(list(views.values()), case.fusion, method) for method in FusionMethod}
            report = staged_report(
                {c: v.raw for c, v in views.items()},
                {c: v.filtered() for c, v in views.items()},
                fused[FusionMethod.WEIGHTED],
                fused[FusionMethod.WTA],
                output.gt_base,
            )
            for stage, stats in report.stages.items():
                values[stage].append(stats.mse)
            for (stage, camera), stats in report.cameras.items():
                if stage == "filtered":
                    values[f"filtered[{camera}]"].append(stats.mse)
        return SweepResult(experiment, loaded.scenario.name, self.seeds, values)

    def _run_filtering(self) -> SweepResult:
        """Corridor/front scene with random misses only: raw vs filtered."""
        loaded = load_preset("paper-shaped")
        cameras = tuple(dataclasses.replace(c, miss=MissSpec(0.05)) for c in loaded.scenario.cameras)
        loaded = dataclasses.replace(loaded, scenario=dataclasses.replace(loaded.scenario, cameras=cameras))
        result = self._staged_sweep("filtering", loaded)
        raw, filtered = result.values["raw"], result.values["filtered"]
        result.wins = {"filtered<raw": sum(f < r for f, r in zip(filtered, raw))}
        return result

    def _run_fusion(self) -> SweepResult:
        """Two equal cameras: fused vs each camera's filtered error."""
        loaded = load_preset("equal-pair")
        result = self._staged_sweep("fusion", loaded)
        per_camera = [result.values[f"filtered[{c}]"] for c in loaded.fusion.weights]
        result.wins = {
            "weighted<every_camera": sum(
                all(w < cam[i] for cam in per_camera) for i, w in enumerate(result.values["weighted"])
            )
        }
        return result

    def _run_switching(self) -> SweepResult:
        """Front camera lost from frame 120: weighted fusion with and without miss switching."""
        loaded = load_preset("paper-shaped")
        unswitched = dataclasses.replace(loaded.fusion, switching=False)
        values: dict[str, list[float]] = {"switching": [], "no_switching": []}
        for seed in self.seeds:
            case = with_seed(loaded, seed)
            output = simulate(case.scenario)
            views = list(camera_views(case, output).values())
            values["switching"].append(mse(fuse_run(views, case.fusion, FusionMethod.WEIGHTED), output.gt_base).mse)
            values["no_switching"].append(mse(fuse_run(views, unswitched, FusionMethod.WEIGHTED), output.gt_base).mse)
        wins = {"switching<no_switching": sum(a < b for a, b in zip(values["switching"], values["no_switching"]))}
        return SweepResult("switching", loaded.scenario.name, self.seeds, values, wins)

    def _run_gap(self) -> SweepResult:
        """Constant-velocity truth, a run of updates, then a gap: error at the gap's last frame."""
        cfg = self.config
        truth = TruthSpec(MotionKind.CONSTANT_VELOCITY, position=(100.0, 200.0), velocity=(2.0, 0.5))
        values: dict[str, list[float]] = {}
        wins: dict[str, int] = {}
        for gap in cfg.gap_lengths:
            last = cfg.gap_updates + gap
            errors: dict[MotionKind, list[float]] = {kind: [] for kind in MotionKind}
            for seed in self.seeds:
                scenario = ScenarioConfig(
                    frames=last + 1,
                    cameras=(
                        CameraSpec(
                            "cam",
                            noise_sigma=cfg.gap_noise_sigma,
                            miss=MissSpec(windows=((cfg.gap_updates + 1, last),)),
                        ),
                    ),
                    truth=truth,
                    seed=seed,
                    name="gap",
                )
                output = simulate(scenario)
                detections = output.detections["cam"]
                measured = {d.frame: centroid(d.bbox) for d in detections}
                for kind in MotionKind:
                    s = init_filter(detections[0], MotionModel(kind))
                    for frame in range(1, last + 1):
                        s = step(s, measured.get(frame))
                    errors[kind].append(position(s).distance_to(output.gt_base[last]))
            cv, ca = errors[MotionKind.CONSTANT_VELOCITY], errors[MotionKind.CONSTANT_ACCELERATION]
            values[f"cv_gap{gap}"] = cv
            values[f"ca_gap{gap}"] = ca
            wins[f"cv<=ca_gap{gap}"] = sum(a <= b for a, b in zip(cv, ca))
        return SweepResult("gap", "gap", self.seeds, values, wins)

    def _save_results(self) -> None:
        """Save results to JSON and a markdown summary."""
        timestamp = datetime.now(timezone.utc).strftime("%Y%m%d_%H%M%S")

        json_path = self.output_dir / f"results_{timestamp}.json"
        json_path.write_text(json.dumps([r.to_dict() for r in self.results], indent=2) + "\n")
        logger.info(f"Saved results to {json_path}")

        summary_path = self.output_dir / f"summary_{timestamp}.md"
        with open(summary_path, "w") as f:
            f.write("# Benchmark Results\n\n")
            f.write(f"Generated: {timestamp}, seeds {self.seeds[0]}..{self.seeds[-1]}\n\n")
            f.write("| Experiment | Series | Mean MSE / error |\n")
            f.write("|------------|--------|------------------|\n")
            for r in self.results:
                for name, value in r.means().items():
                    f.write(f"| {r.experiment} | {name} | {value:.2f} |\n")
            f.write("\n| Experiment | Comparison | Seeds won |\n")
            f.write("|------------|------------|-----------|\n")
            for r in self.results:
                for name, count in r.wins.items():
                    f.write(f"| {r.experiment} | {name} | {count}/{len(r.seeds)} |\n")
        logger.info(f"Saved summary to {summary_path}")

    def _print_summary(self) -> None:
        print("\n" + "=" * 60)
        print("BENCHMARK SUMMARY")
        print("=" * 60)
        for r in self.results:
            print(f"\n{r.experiment} ({r.preset})")
            for name, value in r.means().items():
                print(f"  {name:<24} {value:>10.2f}")
            for name, count in r.wins.items():
                print(f"  {name:<24} {count:>6}/{len(r.seeds)}")
        print("=" * 60)


def _rounded(values: dict[str, float]) -> dict[str, float]:
    return {k: round(v, 2) for k, v in values.items()}


# ============================================================================
# CLI
# ============================================================================

def main():
    parser = argparse.ArgumentParser(description="Run multi-camera fusion seed sweeps.")
    parser.add_argument(
        "--experiments",
        nargs="+",
        default=["filtering", "fusion", "switching", "gap"],
        choices=["filtering", "fusion", "switching", "gap"],
        help="Sweeps to run",
    )
    parser.add_argument("--seeds", type=int, default=100, help="Number of seeds per sweep")
    parser.add_argument("--first-seed", type=int, default=0, help="First seed of the range")
    parser.add_argument("--gaps", type=int, nargs="+", default=[5, 10, 20, 40], help="Gap lengths in frames")
    parser.add_argument("--output", default="./results", help="Output directory for results")

    args = parser.parse_args()

    config = ExperimentConfig(
        experiments=args.experiments,
        n_seeds=args.seeds,
        first_seed=args.first_seed,
        output_dir=args.output,
        gap_lengths=args.gaps,
    )
    ExperimentRunner(config).run()


if __name__ == "__main__":
    main()
