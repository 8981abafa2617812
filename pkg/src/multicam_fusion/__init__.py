"""
PATH: src/multicam_fusion/__init__.py
PURPOSE: Public multicam-fusion package entrypoint.

WHY: Keep filter, tracker, fusion and metric in a small importable library
     that the CLI, the experiment scripts and outside notebooks all share.

DEPENDENCIES:
- numpy
- scipy
- PyYAML
- jsonschema
"""

from multicam_fusion.core import BBox, Detection, Homography, Point2, Track, TrackPoint, centroid, project
from multicam_fusion.errors import FusionToolkitError
from multicam_fusion.estimation import FilterState, MotionKind, MotionModel, NoiseConfig
from multicam_fusion.evaluation import MseReport, mse, staged_report
from multicam_fusion.fusion import FusedTrack, FusionConfig, FusionMethod, fuse_run, fuse_weighted, fuse_wta
from multicam_fusion.scenario import ScenarioConfig, simulate
from multicam_fusion.tracking import TrackerConfig, run_tracker

__all__ = [
    "BBox",
    "Detection",
    "FilterState",
    "FusedTrack",
    "FusionConfig",
    "FusionMethod",
    "FusionToolkitError",
    "Homography",
    "MotionKind",
    "MotionModel",
    "MseReport",
    "NoiseConfig",
    "Point2",
    "ScenarioConfig",
    "Track",
    "TrackPoint",
    "TrackerConfig",
    "centroid",
    "fuse_run",
    "fuse_weighted",
    "fuse_wta",
    "mse",
    "project",
    "run_tracker",
    "simulate",
    "staged_report",
]

__version__ = "0.1.0"
