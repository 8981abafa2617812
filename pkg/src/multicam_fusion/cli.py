"""
PATH: src/multicam_fusion/cli.py
PURPOSE: CLI entrypoint for multicam-fusion (simulate, track, fuse, evaluate, pipeline, presets).

WHY: Every experiment has to be reproducible from a config file and a shell
     line. This CLI is the only place that turns failures into exit codes:
     0 success, 1 usage/config, 2 input data, 3 internal invariant.

FLOW:
┌─────────────────────┐   ┌──────────────────────────┐   ┌────────────────────┐
│ Load config/preset  │──▶│ Run pipeline stage(s)     │──▶│ Print ✅/❌ + files  │
└─────────────────────┘   └──────────────────────────┘   └────────────────────┘

DEPENDENCIES:
- multicam_fusion.config
- multicam_fusion.pipeline
- multicam_fusion.evaluation
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from multicam_fusion import csvio
from multicam_fusion.config import list_presets, load_run_config, load_scenario_config
from multicam_fusion.errors import EXIT_CONFIG, EXIT_INTERNAL, EXIT_OK, FusionToolkitError
from multicam_fusion.evaluation import STAGE_ORDER, mse, render_table
from multicam_fusion.pipeline import fuse_only, ground_truth_on_base, run_pipeline, simulate_scene, track_run

logger = logging.getLogger(__name__)

DEFAULT_PRESET = "paper-shaped"


def _print_files(files: list[Path]) -> None:
    for path in files:
        print(f"  - {path}")


def cmd_simulate(args: argparse.Namespace) -> int:
    """Generate a synthetic scene and its run config."""
    loaded = load_scenario_config(args.config)
    files = simulate_scene(loaded, args.out, seed=args.seed)
    seed = loaded.scenario.seed if args.seed is None else args.seed
    print(f"✅ Scenario '{loaded.scenario.name}' (seed {seed}): {len(files)} file(s) written")
    _print_files(files)
    return EXIT_OK


def cmd_track(args: argparse.Namespace) -> int:
    """Track every camera and write per-camera trajectories."""
    cfg = load_run_config(args.config)
    result = track_run(cfg, out_dir=args.out)
    count = sum(len(tracks) for tracks in result.tracks.values())
    print(f"✅ Tracked {len(result.tracks)} camera(s), {count} track(s)")
    _print_files(result.files)
    return EXIT_OK


def cmd_fuse(args: argparse.Namespace) -> int:
    """Fuse camera tracks with both methods."""
    cfg = load_run_config(args.config)
    result = fuse_only(cfg, out_dir=args.out, tracks_dir=args.tracks)
    for method, fused in result.fused.items():
        print(f"✅ {method.value}: {len(fused.points)} fused point(s)")
    _print_files(result.files)
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    """Single-stage MSE of an estimate CSV against ground truth."""
    estimate = csvio.read_trajectory(args.estimate)
    gt = csvio.read_ground_truth(args.ground_truth)
    if gt.base is None:
        homographies = load_run_config(args.config).homographies() if args.config else {}
        gt_points = ground_truth_on_base(gt, homographies, path=args.ground_truth)
    else:
        gt_points = gt.base
    stats = mse(estimate, gt_points)
    print("mse,rmse,mean_dist,frames")
    print(f"{csvio.fmt(stats.mse)},{csvio.fmt(stats.rmse)},{csvio.fmt(stats.mean_dist)},{stats.frames}")
    return EXIT_OK


def cmd_pipeline(args: argparse.Namespace) -> int:
    """Run the full simulate-free chain on a run config."""
    cfg = load_run_config(args.config)
    stages = [s.strip() for s in args.stages.split(",") if s.strip()] if args.stages else None
    unknown = sorted(set(stages or ()) - set(STAGE_ORDER))
    if unknown:
        raise ValueError(f"unknown stage(s) {unknown}; choose from {','.join(STAGE_ORDER)}")
    result = run_pipeline(cfg, out_dir=args.out, stages=stages)
    if result.report is not None:
        print(render_table(result.report), end="")
        print(f"✅ Pipeline complete: {len(result.report.stages)} stage(s) evaluated")
    else:
        print("✅ Pipeline complete (no ground truth: report skipped)")
    _print_files(result.files)
    return EXIT_OK


def cmd_presets(args: argparse.Namespace) -> int:
    """List the bundled scenario presets."""
    print("multicam-fusion - Scenario Presets\n")
    print("=" * 50)
    for name in list_presets():
        scenario = load_scenario_config(name).scenario
        cameras = ", ".join(c.id for c in scenario.cameras)
        print(f"  🎥 {name}: {scenario.frames} frames, seed {scenario.seed}, cameras [{cameras}]")
    print("=" * 50)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multicam-fusion",
        description="Multi-camera Kalman tracking and track fusion: simulate, track, fuse, evaluate.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Log debug detail to stderr")

    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    # simulate command
    sim_parser = subparsers.add_parser("simulate", help="Generate a synthetic multi-camera scene")
    sim_parser.add_argument(
        "--config",
        default=DEFAULT_PRESET,
        help=f"Scenario YAML path or preset name (default: {DEFAULT_PRESET})",
    )
    sim_parser.add_argument("--out", required=True, help="Directory for gt.csv, detections and run.yaml")
    sim_parser.add_argument("--seed", type=int, default=None, help="Override the scenario seed")

    # track command
    track_parser = subparsers.add_parser("track", help="Track each camera's detections")
    track_parser.add_argument("--config", required=True, help="Run config YAML")
    track_parser.add_argument("--out", default=None, help="Output directory (default: output_dir from config)")

    # fuse command
    fuse_parser = subparsers.add_parser("fuse", help="Fuse camera tracks (weighted sum and winner-take-all)")
    fuse_parser.add_argument("--config", required=True, help="Run config YAML")
    fuse_parser.add_argument("--out", default=None, help="Output directory (default: output_dir from config)")
    fuse_parser.add_argument("--tracks", default=None, help="Directory holding tracks_<camera>.csv to fuse")

    # evaluate command
    eval_parser = subparsers.add_parser("evaluate", help="MSE of one estimate CSV against ground truth")
    eval_parser.add_argument("estimate", help="Estimate CSV with frame,x,y columns")
    eval_parser.add_argument("ground_truth", help="Ground-truth CSV (frame,x,y or frame,camera,cx,cy)")
    eval_parser.add_argument("--config", default=None, help="Run config whose homographies project per-camera GT")

    # pipeline command
    pipe_parser = subparsers.add_parser("pipeline", help="Track, fuse and evaluate in one run")
    pipe_parser.add_argument("--config", required=True, help="Run config YAML")
    pipe_parser.add_argument("--out", default=None, help="Output directory (default: output_dir from config)")
    pipe_parser.add_argument(
        "--stages",
        default=None,
        help=f"Comma-separated subset of {','.join(STAGE_ORDER)} to report",
    )

    # presets command
    subparsers.add_parser("presets", help="List bundled scenario presets")

    return parser


COMMANDS = {
    "simulate": cmd_simulate,
    "track": cmd_track,
    "fuse": cmd_fuse,
    "evaluate": cmd_evaluate,
    "pipeline": cmd_pipeline,
    "presets": cmd_presets,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_CONFIG

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s [%(levelname)s] %(message)s",
    )

    command = COMMANDS.get(args.command)
    if command is None:
        parser.print_help()
        return EXIT_OK

    try:
        return command(args)
    except FusionToolkitError as e:
        tag = f"[{e.stage}] " if e.stage else ""
        print(f"❌ {tag}{type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    except ValueError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001
        logger.debug("unexpected failure", exc_info=True)
        print(f"❌ internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main(sys.argv[1:]))
