"""
PATH: src/multicam_fusion/config.py
PURPOSE: Load and validate run configs and scenario configs (or named presets)
         from YAML, and write the run config that goes with a simulated scene.

WHY: The config file is the single source of truth for a run. Every rejection
     has to name the offending key and, where the YAML node can be found, the
     line, so a broken config is fixed in one edit.

FLOW:
┌──────────────────────┐   ┌──────────────────────────┐   ┌──────────────────────────┐
│ YAML text → data +   │──▶│ JSON Schema, then weights │──▶│ RunConfig / Scenario      │
│ node tree (lines)    │   │ / cameras / homographies  │   │ (frozen dataclasses)      │
└──────────────────────┘   └──────────────────────────┘   └──────────────────────────┘

DEPENDENCIES:
- PyYAML
- jsonschema
"""

from __future__ import annotations

import dataclasses
import json
import math
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any

import yaml

from multicam_fusion.core import Homography
from multicam_fusion.errors import ConfigError, SingularHomographyError
from multicam_fusion.estimation import MotionModel, NoiseConfig
from multicam_fusion.fusion import WEIGHT_SUM_TOLERANCE, FusionConfig
from multicam_fusion.scenario import CameraSpec, MissSpec, ScenarioConfig, TruthSpec
from multicam_fusion.tracking import TrackerConfig

# Use a compatible validator - try newer version first, fall back to older
try:
    from jsonschema import Draft202012Validator as Validator
except ImportError:
    try:
        from jsonschema import Draft7Validator as Validator
    except ImportError:
        from jsonschema import Draft4Validator as Validator

KeyPath = Sequence[str | int]

DEFAULT_OUTPUT_DIR = "results"
RUN_CONFIG_NAME = "run.yaml"


@dataclasses.dataclass(frozen=True)
class CameraInput:
    """One camera of a run: image → base-plane map and its detection file."""

    id: str
    homography: Homography
    detections: Path


@dataclasses.dataclass(frozen=True)
class RunConfig:
    tracker: TrackerConfig
    fusion: FusionConfig
    cameras: tuple[CameraInput, ...]
    ground_truth: Path | None = None
    output_dir: Path = Path(DEFAULT_OUTPUT_DIR)
    parallel: bool = False
    sort_detections: bool = False
    source: Path | None = None

    def __post_init__(self) -> None:
        ids = [c.id for c in self.cameras]
        if not ids:
            raise ValueError("run config needs at least one camera")
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate camera ids in {ids}")
        if set(ids) != set(self.fusion.weights):
            raise ValueError(
                f"fusion weights name cameras {sorted(self.fusion.weights)} but cameras are {sorted(ids)}"
            )

    @property
    def camera_ids(self) -> list[str]:
        return [c.id for c in self.cameras]

    def homographies(self) -> dict[str, Homography]:
        return {c.id: c.homography for c in self.cameras}


@dataclasses.dataclass(frozen=True)
class ScenarioFile:
    """A scenario plus the tracker/fusion settings its generated run config will carry."""

    scenario: ScenarioConfig
    tracker: TrackerConfig
    fusion: FusionConfig
    source: Path | None = None


# ---------------------------------------------------------------------------
# Locations
# ---------------------------------------------------------------------------


def _repo_root() -> Path:
    return Path(__file__).resolve().parents[2]


def _get_schema(name: str) -> dict[str, Any]:
    schema_path = _repo_root() / "schemas" / name
    return json.loads(schema_path.read_text(encoding="utf-8"))


def get_presets_dir() -> Path:
    return _repo_root() / "presets"


def list_presets(presets_dir: Path | None = None) -> list[str]:
    presets_dir = presets_dir or get_presets_dir()
    return sorted(p.stem.replace("_", "-") for p in presets_dir.glob("*.yaml"))


# ---------------------------------------------------------------------------
# YAML documents with line lookup
# ---------------------------------------------------------------------------


def dotted(keys: KeyPath) -> str:
    """('cameras', 'front', 'occlusions', 0) → 'cameras.front.occlusions[0]'."""
    out = ""
    for key in keys:
        if isinstance(key, int):
            out += f"[{key}]"
        else:
            out += f".{key}" if out else str(key)
    return out


class _Document:
    """Parsed YAML data together with its node tree, for error locations."""

    def __init__(self, text: str, path: Path | None):
        self.path = path
        try:
            self.root = yaml.compose(text)
            self.data = yaml.safe_load(text)
        except yaml.MarkedYAMLError as e:
            mark = e.problem_mark or e.context_mark
            raise ConfigError(
                f"YAML syntax error: {e.problem or e}",
                path=self._label(),
                line=mark.line + 1 if mark else None,
            ) from e
        if not isinstance(self.data, dict):
            raise ConfigError("top level must be a mapping", path=self._label(), line=1)

    def _label(self) -> str:
        return str(self.path) if self.path else "<config>"

    def line(self, keys: KeyPath) -> int | None:
        node = self.root
        if node is None:
            return None
        line = node.start_mark.line + 1
        for key in keys:
            if isinstance(node, yaml.MappingNode):
                for k, v in node.value:
                    if k.value == str(key):
                        line, node = k.start_mark.line + 1, v
                        break
                else:
                    break
            elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
                node = node.value[key]
                line = node.start_mark.line + 1
            else:
                break
        return line

    def error(self, message: str, keys: KeyPath) -> ConfigError:
        return ConfigError(message, key=dotted(keys) or None, path=self._label(), line=self.line(keys))

    def validate(self, schema: dict[str, Any], data: Any = None, prefix: KeyPath = ()) -> None:
        validator = Validator(schema)
        errors = sorted(
            validator.iter_errors(self.data if data is None else data),
            key=lambda e: [str(p) for p in e.absolute_path],
        )
        if errors:
            first = errors[0]
            raise self.error(first.message, [*prefix, *first.absolute_path])


def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror}", path=str(path)) from e


def _string_keys(mapping: Mapping[Any, Any]) -> dict[str, Any]:
    return {str(k): v for k, v in mapping.items()}


# ---------------------------------------------------------------------------
# Sections shared by run and scenario configs
# ---------------------------------------------------------------------------


def _homography(doc: _Document, values: Sequence[float] | None, keys: KeyPath) -> Homography:
    if values is None:
        return Homography.identity()
    try:
        return Homography.from_flat(values)
    except (SingularHomographyError, ValueError) as e:
        raise doc.error(str(e), keys) from e


def _tracker(doc: _Document, section: Mapping[str, Any] | None, keys: KeyPath) -> TrackerConfig:
    section = section or {}
    noise = section.get("noise") or {}
    try:
        return TrackerConfig(
            model=MotionModel(kind=section.get("model", "cv"), dt=float(section.get("dt", 1.0))),
            noise=NoiseConfig(
                q_scale=float(noise.get("q_scale", 1.0)),
                r_scale=float(noise.get("r_scale", 1.0)),
                p0_scale=float(noise.get("p0_scale", 1.0)),
            ),
            gate_radius=float(section.get("gate_radius", 50.0)),
            max_misses=int(section.get("max_misses", 30)),
        )
    except ValueError as e:
        raise doc.error(str(e), keys) from e


def _fusion(
    doc: _Document,
    section: Mapping[str, Any] | None,
    cameras: Sequence[str],
    keys: KeyPath,
) -> FusionConfig:
    section = section or {}
    weights_keys = [*keys, "weights"]
    if "weights" in section:
        weights = {k: float(v) for k, v in _string_keys(section["weights"]).items()}
    else:
        weights = {camera: 1.0 / len(cameras) for camera in cameras}

    total = math.fsum(weights.values())
    if abs(total - 1.0) > WEIGHT_SUM_TOLERANCE:
        raise doc.error(f"weights must sum to 1, got {total:g}", weights_keys)
    if set(weights) != set(cameras):
        raise doc.error(
            f"weights name cameras {sorted(weights)} but cameras are {sorted(cameras)}",
            weights_keys,
        )
    try:
        return FusionConfig(
            weights=weights,
            miss_threshold=int(section.get("miss_threshold", 3)),
            score_window=int(section.get("score_window", 10)),
            switching=bool(section.get("switching", True)),
        )
    except ValueError as e:
        raise doc.error(str(e), keys) from e


# ---------------------------------------------------------------------------
# Run configs
# ---------------------------------------------------------------------------


def parse_run_config(text: str, path: Path | None = None) -> RunConfig:
    """Parse run-config YAML text. Relative paths resolve against ``path``'s directory."""
    doc = _Document(text, path)
    doc.validate(_get_schema("run_config.schema.json"))
    data = doc.data
    base = path.parent if path else Path.cwd()

    def resolve(value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else base / p

    cameras_section = _string_keys(data["cameras"])
    cameras = tuple(
        CameraInput(
            id=camera,
            homography=_homography(doc, spec.get("homography"), ("cameras", camera, "homography")),
            detections=resolve(spec["detections"]),
        )
        for camera, spec in cameras_section.items()
    )
    gt = data.get("ground_truth")
    return RunConfig(
        tracker=_tracker(doc, data.get("tracker"), ("tracker",)),
        fusion=_fusion(doc, data.get("fusion"), list(cameras_section), ("fusion",)),
        cameras=cameras,
        ground_truth=resolve(gt) if gt else None,
        output_dir=resolve(data.get("output_dir", DEFAULT_OUTPUT_DIR)),
        parallel=bool(data.get("parallel", False)),
        sort_detections=bool(data.get("sort_detections", False)),
        source=path,
    )


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    return parse_run_config(_read_text(path), path)


# ---------------------------------------------------------------------------
# Scenario configs and presets
# ---------------------------------------------------------------------------


def _run_template_schema() -> dict[str, Any]:
    run_schema = _get_schema("run_config.schema.json")
    return {
        "$defs": run_schema["$defs"],
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "tracker": {"$ref": "#/$defs/tracker"},
            "fusion": {"$ref": "#/$defs/fusion"},
        },
    }


def parse_scenario_config(text: str, path: Path | None = None) -> ScenarioFile:
    doc = _Document(text, path)
    doc.validate(_get_schema("scenario.schema.json"))
    run = doc.data.get("run") or {}
    doc.validate(_run_template_schema(), data=run, prefix=("run",))

    section = doc.data["scenario"]
    frames = int(section["frames"])
    truth_section = section.get("truth") or {}
    try:
        truth = TruthSpec(
            model=truth_section.get("model", "cv"),
            position=tuple(float(v) for v in truth_section.get("position", (0.0, 0.0))),
            velocity=tuple(float(v) for v in truth_section.get("velocity", (1.0, 0.0))),
            acceleration=tuple(float(v) for v in truth_section.get("acceleration", (0.0, 0.0))),
        )
    except ValueError as e:
        raise doc.error(str(e), ("scenario", "truth")) from e

    cameras: list[CameraSpec] = []
    for camera, spec in _string_keys(section["cameras"]).items():
        spec = spec or {}
        keys = ("scenario", "cameras", camera)
        windows = [tuple(w) for w in spec.get("occlusions", [])]
        for i, (start, end) in enumerate(windows):
            if start > end or end >= frames:
                raise doc.error(
                    f"window [{start}, {end}] must satisfy start <= end < frames ({frames})",
                    [*keys, "occlusions", i],
                )
        try:
            cameras.append(
                CameraSpec(
                    id=camera,
                    homography=_homography(doc, spec.get("homography"), [*keys, "homography"]),
                    noise_sigma=float(spec.get("noise_sigma", 0.0)),
                    miss=MissSpec(probability=float(spec.get("miss_probability", 0.0)), windows=tuple(windows)),
                )
            )
        except ValueError as e:
            raise doc.error(str(e), keys) from e

    try:
        scenario = ScenarioConfig(
            frames=frames,
            cameras=tuple(cameras),
            truth=truth,
            seed=int(section.get("seed", 0)),
            name=str(section.get("name", path.stem.replace("_", "-") if path else "custom")),
            box=tuple(float(v) for v in section.get("box", (40.0, 100.0))),
        )
    except ValueError as e:
        raise doc.error(str(e), ("scenario",)) from e

    return ScenarioFile(
        scenario=scenario,
        tracker=_tracker(doc, run.get("tracker"), ("run", "tracker")),
        fusion=_fusion(doc, run.get("fusion"), [c.id for c in cameras], ("run", "fusion")),
        source=path,
    )


def load_preset(name: str, presets_dir: Path | None = None) -> ScenarioFile:
    presets_dir = presets_dir or get_presets_dir()
    path = presets_dir / f"{name.replace('-', '_')}.yaml"
    if not path.is_file():
        raise ConfigError(f"unknown preset '{name}'; available: {', '.join(list_presets(presets_dir))}")
    return parse_scenario_config(_read_text(path), path)


def load_scenario_config(ref: str | Path) -> ScenarioFile:
    """Load a scenario from a file path or, failing that, a preset name."""
    path = Path(ref)
    if path.is_file():
        return parse_scenario_config(_read_text(path), path)
    if path.suffix in (".yaml", ".yml") or len(path.parts) > 1:
        raise ConfigError(f"scenario config not found: {path}")
    return load_preset(str(ref))


def to_run_config(
    loaded: ScenarioFile,
    directory: str | Path,
    ground_truth: str = "gt.csv",
    output_dir: str = DEFAULT_OUTPUT_DIR,
) -> Path:
    """
    Write ``run.yaml`` for a simulated scene into ``directory``.

    Scenario homographies map base → image; the run config carries their
    inverses, the image → base maps the pipeline projects with.
    """
    directory = Path(directory)
    tracker = loaded.tracker
    fusion = loaded.fusion
    document = {
        "tracker": {
            "model": tracker.model.kind.value,
            "dt": tracker.model.dt,
            "gate_radius": tracker.gate_radius,
            "max_misses": tracker.max_misses,
            "noise": {
                "q_scale": tracker.noise.q_scale,
                "r_scale": tracker.noise.r_scale,
                "p0_scale": tracker.noise.p0_scale,
            },
        },
        "fusion": {
            "weights": dict(fusion.weights),
            "miss_threshold": fusion.miss_threshold,
            "score_window": fusion.score_window,
            "switching": fusion.switching,
        },
        "cameras": {
            cam.id: {
                "homography": cam.homography.inverse().flat(),
                "detections": f"detections_{cam.id}.csv",
            }
            for cam in loaded.scenario.cameras
        },
        "ground_truth": ground_truth,
        "output_dir": output_dir,
    }
    path = directory / RUN_CONFIG_NAME
    path.write_text(yaml.safe_dump(document, sort_keys=False), encoding="utf-8")
    return path
