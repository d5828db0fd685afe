"""Exceptions and exit codes shared by the simulation modules and the CLI."""

from __future__ import annotations

# Exit codes for CLI (only used in run_* wrapper functions)
EXIT_SUCCESS = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class MorphgridError(Exception):
    """Base class for all morphgrid errors."""


class ConfigError(MorphgridError):
    """Raised when a configuration file or section is invalid."""


class DimensionMismatch(MorphgridError, ValueError):
    """Raised when array shapes do not agree."""


class FormatError(MorphgridError):
    """Raised when a data file cannot be parsed."""

    def __init__(
        self, message: str, *, line: int | None = None, field: int | None = None
    ) -> None:
        self.line = line
        self.field = field
        where = ""
        if line is not None:
            where = f" (line {line}"
            where += f", field {field})" if field is not None else ")"
        super().__init__(f"{message}{where}")


class NotRepresentable(MorphgridError):
    """Raised when a target grid cannot be produced by direct passive addressing."""


class TargetExceedsSupply(MorphgridError, ValueError):
    """Raised when a target voltage exceeds the supply range."""


class MissingComponents(MorphgridError):
    """Raised when in-plane displacement components are required but absent."""


# -----------------------------------------------------------------------------
# Numeric failures (exit code 3)
# -----------------------------------------------------------------------------


class NumericError(MorphgridError):
    """Base class for numeric failures."""


class SingularSystem(NumericError):
    """Raised when a nodal system has no driven contact."""


class SolverFailure(NumericError):
    """Raised when a linear solve does not meet its residual tolerance."""

    def __init__(self, message: str, residual: float) -> None:
        self.residual = residual
        super().__init__(f"{message} (residual {residual:.3e})")


class CalibrationError(NumericError):
    """Raised when a calibration target cannot be bracketed."""


class UnreachablePixel(NumericError):
    """Raised when a pixel receives no voltage, so its input cannot be compensated."""


class RepairFailure(NumericError):
    """Raised when a random grid cannot satisfy the adjacency cap."""


class NonFiniteLoss(NumericError):
    """Raised when training produces a NaN or infinite loss."""


class DegenerateCloud(NumericError):
    """Raised when a point cloud does not span a plane."""


class XYMismatch(NumericError):
    """Raised when matched surfaces do not share x-y coordinates."""


class FingerprintMismatch(UserWarning):
    """Warned when a data file was produced by a different configuration."""
