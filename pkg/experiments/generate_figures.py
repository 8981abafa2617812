#!/usr/bin/env python3
"""
PATH: experiments/generate_figures.py
PURPOSE: Plot a pipeline run and a benchmark sweep.

FIGURES:
- trajectories: ground truth, per-camera filtered tracks and both fused tracks on the base plane
- per_frame_error: squared error per frame for every reported stage
- sweep_means: mean MSE per stage from run_benchmarks.py output

DEPENDENCIES:
- matplotlib
- numpy
- multicam_fusion (CSV readers)
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path
from typing import Any

import matplotlib.pyplot as plt
import numpy as np

from multicam_fusion import csvio
from multicam_fusion.evaluation import STAGE_ORDER

plt.style.use('seaborn-v0_8-whitegrid')
plt.rcParams.update({
    'font.family': 'serif',
    'font.size': 10,
    'axes.labelsize': 11,
    'axes.titlesize': 12,
    'legend.fontsize': 9,
    'figure.figsize': (6, 4),
    'figure.dpi': 150,
    'savefig.dpi': 300,
    'savefig.bbox': 'tight',
})

# Colorblind-friendly
COLORS = {
    'gt': '#000000',
    'raw': '#7f7f7f',
    'filtered': '#1f77b4',
    'weighted': '#2ca02c',
    'wta': '#d62728',
}


def _save(fig, output_dir: Path, name: str) -> None:
    fig.tight_layout()
    fig.savefig(output_dir / f'{name}.pdf')
    fig.savefig(output_dir / f'{name}.png')
    plt.close(fig)
    print(f"Saved: {name}.pdf")


def _xy(trajectory: dict) -> tuple[np.ndarray, np.ndarray]:
    frames = sorted(trajectory)
    return (np.array([trajectory[f].x for f in frames]), np.array([trajectory[f].y for f in frames]))


def generate_trajectories(run_dir: Path, ground_truth: Path | None, output_dir: Path) -> None:
    """Base-plane paths of every filtered camera track and both fused tracks."""
    fig, ax = plt.subplots(figsize=(6, 5))

    if ground_truth is not None and ground_truth.exists():
        gt = csvio.read_ground_truth(ground_truth)
        if gt.base is not None:
            ax.plot(*_xy(gt.base), color=COLORS['gt'], linewidth=2, label='ground truth')

    for path in sorted(run_dir.glob('filtered_*.csv')):
        camera = path.stem.removeprefix('filtered_')
        ax.plot(*_xy(csvio.read_trajectory(path)), linestyle=':', alpha=0.8, label=f'filtered [{camera}]')
    for method in ('weighted', 'wta'):
        path = run_dir / f'fused_{method}.csv'
        if path.exists():
            ax.plot(*_xy(csvio.read_trajectory(path)), color=COLORS[method], label=method)

    ax.set_xlabel('x (base plane)')
    ax.set_ylabel('y (base plane)')
    ax.set_aspect('equal', adjustable='datalim')
    ax.legend()
    _save(fig, output_dir, 'trajectories')


def generate_per_frame_error(run_dir: Path, output_dir: Path) -> None:
    """Squared error per frame, one line per stage."""
    path = run_dir / 'per_frame.csv'
    if not path.exists():
        print(f"Skipped per_frame_error: {path} not found (run the pipeline with per-frame output)")
        return
    series = csvio.read_per_frame(path)

    fig, ax = plt.subplots(figsize=(7, 4))
    for stage in STAGE_ORDER:
        if stage not in series:
            continue
        frames, errors = zip(*series[stage])
        ax.plot(frames, errors, color=COLORS[stage], label=stage, linewidth=1)
    ax.set_yscale('log')
    ax.set_xlabel('frame')
    ax.set_ylabel('squared error')
    ax.legend()
    _save(fig, output_dir, 'per_frame_error')


def generate_sweep_means(results: list[dict[str, Any]], output_dir: Path) -> None:
    """Mean MSE per stage for each staged sweep in a benchmark result file."""
    staged = [r for r in results if r['experiment'] in ('filtering', 'fusion')]
    if not staged:
        print("Skipped sweep_means: no staged sweeps in results")
        return

    fig, ax = plt.subplots(figsize=(6, 4))
    width = 0.8 / len(STAGE_ORDER)
    x = np.arange(len(staged))
    for i, stage in enumerate(STAGE_ORDER):
        means = [r['means'].get(stage, np.nan) for r in staged]
        ax.bar(x + i * width, means, width, color=COLORS[stage], label=stage)
    ax.set_xticks(x + width * (len(STAGE_ORDER) - 1) / 2)
    ax.set_xticklabels([f"{r['experiment']} ({r['preset']})" for r in staged])
    ax.set_ylabel('mean MSE')
    ax.legend()
    _save(fig, output_dir, 'sweep_means')


def generate_all_figures(run_dir: Path | None, ground_truth: Path | None, results_path: Path | None,
                         output_dir: Path) -> None:
    output_dir.mkdir(parents=True, exist_ok=True)
    print(f"Generating figures in {output_dir}")

    if run_dir is not None:
        generate_trajectories(run_dir, ground_truth, output_dir)
        generate_per_frame_error(run_dir, output_dir)
    if results_path is not None:
        with open(results_path, 'r') as f:
            generate_sweep_means(json.load(f), output_dir)

    print(f"\nAll figures generated in {output_dir}")


def main():
    parser = argparse.ArgumentParser(description="Plot multi-camera fusion runs and sweeps.")
    parser.add_argument("--run", type=Path, default=None, help="Pipeline output directory")
    parser.add_argument("--ground-truth", type=Path, default=None, help="Base-plane gt.csv for the run")
    parser.add_argument("--results", type=Path, default=None, help="JSON written by run_benchmarks.py")
    parser.add_argument("--output", type=Path, default=Path("./figures"), help="Output directory for figures")

    args = parser.parse_args()
    if args.run is None and args.results is None:
        parser.error("give --run and/or --results")
    generate_all_figures(args.run, args.ground_truth, args.results, args.output)


if __name__ == "__main__":
    main()
