"""
PATH: src/multicam_fusion/errors.py
PURPOSE: Exception hierarchy shared by every stage of the toolkit.

WHY: The CLI maps failures to stable exit codes (1 config, 2 input data,
     3 internal invariant). Each error class carries its own code so the
     mapping lives next to the error, not in a lookup table in the CLI.
"""

from __future__ import annotations

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3


class FusionToolkitError(Exception):
    """Base class for all toolkit failures."""

    exit_code: int = EXIT_INTERNAL
    stage: str | None = None  # set by the pipeline when the failure is re-raised


class ConfigError(FusionToolkitError):
    """Invalid run or scenario configuration."""

    exit_code = EXIT_CONFIG

    def __init__(self, message: str, key: str | None = None, path: str | None = None, line: int | None = None):
        self.key = key
        self.path = path
        self.line = line
        location = path or "<config>"
        if line is not None:
            location = f"{location}:{line}"
        prefix = f"{location}: {key}: " if key else f"{location}: "
        super().__init__(prefix + message)


class IngestionError(FusionToolkitError):
    """A CSV input file could not be parsed."""

    exit_code = EXIT_INPUT

    def __init__(self, message: str, path: str | None = None, row: int | None = None, column: str | None = None):
        self.path = path
        self.row = row
        self.column = column
        parts = [path or "<csv>"]
        if row is not None:
            parts.append(f"row {row}")
        if column:
            parts.append(f"column '{column}'")
        super().__init__(f"{', '.join(parts)}: {message}")


class UnsortedInputError(FusionToolkitError):
    """Detection stream frame index decreased."""

    exit_code = EXIT_INPUT


class NoOverlapError(FusionToolkitError):
    """Estimate and ground truth share no frame index."""

    exit_code = EXIT_INPUT


class DegenerateProjectionError(FusionToolkitError):
    """Point maps to the homography's horizon (homogeneous w ≈ 0)."""

    exit_code = EXIT_INPUT


class SingularHomographyError(FusionToolkitError):
    """Homography determinant magnitude at or below tolerance."""

    exit_code = EXIT_CONFIG


class NoHealthySourceError(FusionToolkitError):
    """Every camera was excluded from fusion for this frame."""

    exit_code = EXIT_INPUT


class NoSourceError(FusionToolkitError):
    """No ground-truth point available for this frame."""

    exit_code = EXIT_INPUT


class SingularInnovationError(FusionToolkitError):
    """Innovation covariance could not be inverted."""

    exit_code = EXIT_INTERNAL


class InvariantViolation(FusionToolkitError):
    """An internal contract was broken."""

    exit_code = EXIT_INTERNAL
