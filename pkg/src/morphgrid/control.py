"""Forward and inverse surface control with trained networks."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .common import DimensionMismatch
from .crossbar import VoltageGrid
from .dataset import LEVELS, Mode, vectorize_surface
from .mechanics import Heightfield, PlateConfig, plate_solve, sample_nodes
from .mlp import MlpModel, predict, r2_score
from .pointcloud import SurfaceErrorReport, heightfield_to_cloud, surface_error

if TYPE_CHECKING:
    from collections.abc import Sequence

logger = logging.getLogger(__name__)

# -----------------------------------------------------------------------------
# Data Types
# -----------------------------------------------------------------------------


@dataclass(frozen=True)
class InversionResult:
    target: Heightfield
    voltages: VoltageGrid
    achieved: Heightfield | None = None
    error: SurfaceErrorReport | None = None
    r2: float | None = None


# -----------------------------------------------------------------------------
# Main Public API
# -----------------------------------------------------------------------------


def snap_voltages(values: np.ndarray) -> np.ndarray:
    """Clamp to [−1, 1] V and round to the nearest 0.05 V lattice level."""
    return np.round(np.clip(values, -1.0, 1.0) * LEVELS) / LEVELS


def node_axes(plate: PlateConfig, nodes: int) -> np.ndarray:
    return np.linspace(0.0, plate.side, nodes)


def simulate_surface(grid: VoltageGrid, plate: PlateConfig, nodes: int) -> Heightfield:
    return sample_nodes(plate_solve(grid, plate), nodes)


def forward_surface(model: MlpModel, grid: VoltageGrid, plate: PlateConfig) -> Heightfield:
    """Predicted z heightfield for pixel voltages ``grid``."""
    out = predict(model, grid.flatten())
    nodes = int(round(np.sqrt(out.size)))
    if nodes * nodes != out.size:
        msg = f"model output of length {out.size} is not a square node grid"
        raise DimensionMismatch(msg)
    axis = node_axes(plate, nodes)
    return Heightfield(axis, axis, out.reshape(nodes, nodes))


def surface_r2(achieved: np.ndarray, target: np.ndarray) -> float:
    """R² of one surface against another, treating nodes as samples."""
    return r2_score(np.ravel(achieved)[:, None], np.ravel(target)[:, None])


def invert_surface(
    model: MlpModel,
    target: Heightfield,
    plate: PlateConfig,
    *,
    mode: Mode = "z",
    snap: bool = True,
    simulate: bool = True,
) -> InversionResult:
    """Voltages for ``target`` from an inverse model, optionally re-simulated.

    ``target`` is resampled to the model's node count when it is finer.
    """
    nodes = int(round(np.sqrt(model.spec.input_dim)))
    if nodes * nodes != model.spec.input_dim:
        msg = f"model input of length {model.spec.input_dim} is not a square node grid"
        raise DimensionMismatch(msg)
    if target.shape != (nodes, nodes):
        target = sample_nodes(target, nodes)

    raw = predict(model, vectorize_surface(target, mode))
    side = plate.pixels_per_side
    if raw.size != side * side:
        msg = f"model output of length {raw.size} does not match {side}×{side} pixels"
        raise DimensionMismatch(msg)
    values = snap_voltages(raw) if snap else raw
    grid = VoltageGrid(values.reshape(side, side))
    if not simulate:
        return InversionResult(target, grid)

    achieved = simulate_surface(grid, plate, nodes)
    a, t = heightfield_to_cloud(achieved), heightfield_to_cloud(target)
    error = surface_error(a, t, xy_tolerance=1e-6 * plate.side)
    r2 = surface_r2(achieved.z, target.z)
    logger.info("closed loop: R² %.4f, mean |dz| %.3f mm", r2, error.mean_abs)
    return InversionResult(target, grid, achieved, error, r2)


def invert_sequence(
    model: MlpModel,
    targets: Sequence[Heightfield],
    plate: PlateConfig,
    **kwargs: object,
) -> list[InversionResult]:
    """Invert each frame of a morphing sequence independently."""
    return [invert_surface(model, t, plate, **kwargs) for t in targets]  # type: ignore[arg-type]
