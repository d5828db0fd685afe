"""Voltage-to-shape models.

Two models share the same convention: positive pixel voltage bends toward +z.

- ``strip_*``: constant-curvature bilayer strip (Timoshenko mismatch formula).
- ``plate_*``: linear Kirchhoff plate with free edges, pinned at its centre
  node, loaded by a per-pixel eigencurvature: the free curvature of the
  bilayer strip at that pixel's voltage.

The plate is discretized by finite differences of the bending energy

    ½∫ (w_xx − m)² + (w_yy − m)² + 2ν(w_xx − m)(w_yy − m) + 2(1 − ν)w_xy² dA

with trapezoid weights. Edge nodes use one-sided second differences and the
twist term lives at cell centres, so free-edge conditions need no ghost nodes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import RegularGridInterpolator

from .common import DimensionMismatch, MissingComponents, SolverFailure
from .crossbar import VoltageGrid

logger = logging.getLogger(__name__)

PLATE_TOLERANCE = 1e-8

# -----------------------------------------------------------------------------
# Data Types
# -----------------------------------------------------------------------------


@dataclass(frozen=True)
class StripConfig:
    """Bilayer strip: active polymer layer on a passive substrate (mm, strain/V)."""

    length: float = 20.0
    beta: float = 0.0016
    h_sub: float = 0.090
    h_ppy: float = 0.012
    modulus_ratio: float = 1.0  # E_active / E_substrate

    def __post_init__(self) -> None:
        for name in ("length", "beta", "h_sub", "h_ppy", "modulus_ratio"):
            if not getattr(self, name) > 0:
                msg = f"{name} must be positive, got {getattr(self, name)}"
                raise ValueError(msg)


@dataclass(frozen=True)
class PlateConfig:
    """Square pixelated plate, pinned at its centre node."""

    side: float = 54.0
    pixels_per_side: int = 6
    pixel_pitch: float = 9.0
    pixel_active: float = 7.5
    grid_n: int = 61
    strip: StripConfig = StripConfig()  # active layer, sets the curvature per volt
    nu: float = 0.34
    thickness: float = 0.102

    def __post_init__(self) -> None:
        if self.pixels_per_side < 1:
            msg = f"pixels_per_side must be at least 1, got {self.pixels_per_side}"
            raise ValueError(msg)
        if self.grid_n < 3 or self.grid_n % 2 == 0:
            msg = f"grid_n must be odd and at least 3, got {self.grid_n}"
            raise ValueError(msg)
        if not 0 <= self.nu < 0.5:
            msg = f"nu must be in [0, 0.5), got {self.nu}"
            raise ValueError(msg)
        if not 0 < self.pixel_active <= self.pixel_pitch:
            msg = "pixel_active must be positive and at most pixel_pitch"
            raise ValueError(msg)
        if self.pixels_per_side * self.pixel_pitch > self.side * (1 + 1e-12):
            msg = "pixels do not fit on the plate"
            raise ValueError(msg)
        if self.thickness < 0:
            msg = f"thickness must be non-negative, got {self.thickness}"
            raise ValueError(msg)

    @property
    def kappa_per_volt(self) -> float:
        """Free curvature of the strip per volt, 1/(mm·V)."""
        return strip_curvature(1.0, self.strip)

    @property
    def spacing(self) -> float:
        return self.side / (self.grid_n - 1)

    def coordinates(self) -> np.ndarray:
        return np.linspace(0.0, self.side, self.grid_n)


@dataclass(frozen=True)
class Heightfield:
    """Surface displacement on a regular grid; arrays are indexed ``[iy, ix]``."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    dx: np.ndarray | None = None
    dy: np.ndarray | None = None

    def __post_init__(self) -> None:
        x = np.array(self.x, dtype=float)
        y = np.array(self.y, dtype=float)
        z = np.array(self.z, dtype=float)
        if x.ndim != 1 or y.ndim != 1 or z.shape != (y.size, x.size):
            msg = f"z shape {z.shape} does not match axes ({y.size}, {x.size})"
            raise DimensionMismatch(msg)
        if (self.dx is None) != (self.dy is None):
            msg = "dx and dy must be given together"
            raise ValueError(msg)
        arrays = {"x": x, "y": y, "z": z}
        if self.dx is not None:
            arrays["dx"] = np.array(self.dx, dtype=float)
            arrays["dy"] = np.array(self.dy, dtype=float)
            if arrays["dx"].shape != z.shape or arrays["dy"].shape != z.shape:
                msg = "in-plane components must match z"
                raise DimensionMismatch(msg)
        for name, arr in arrays.items():
            if not np.all(np.isfinite(arr)):
                msg = f"{name} must be finite"
                raise ValueError(msg)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.z.shape  # type: ignore[return-value]

    @property
    def has_components(self) -> bool:
        return self.dx is not None

    def total(self) -> np.ndarray:
        """Displacement magnitude √(dx² + dy² + dz²) per node."""
        if self.dx is None or self.dy is None:
            msg = "total displacement needs dx and dy components"
            raise MissingComponents(msg)
        return np.sqrt(self.dx**2 + self.dy**2 + self.z**2)

    def height_range(self) -> float:
        return float(self.z.max() - self.z.min())


# -----------------------------------------------------------------------------
# Strip
# -----------------------------------------------------------------------------


def strip_curvature(v: float, cfg: StripConfig) -> float:
    """Curvature (1/mm) of a free bilayer under mismatch strain ``beta·v``."""
    eps = cfg.beta * v
    h = cfg.h_sub + cfg.h_ppy
    m = cfg.h_ppy / cfg.h_sub
    n = cfg.modulus_ratio
    denom = h * (3 * (1 + m) ** 2 + (1 + m * n) * (m**2 + 1 / (m * n)))
    return 6 * eps * (1 + m) ** 2 / denom


def _arc_tip(kappa: float, length: float) -> tuple[float, float]:
    theta = kappa * length
    if abs(theta) < 1e-8:
        return length, 0.5 * kappa * length**2
    return math.sin(theta) / kappa, (1 - math.cos(theta)) / kappa


def strip_tip_path(
    v_ramp: list[float] | np.ndarray, cfg: StripConfig
) -> tuple[np.ndarray, float]:
    """Tip positions along a voltage ramp and the length of the tip trajectory."""
    ramp = np.asarray(v_ramp, dtype=float).ravel()
    if ramp.size == 0:
        msg = "voltage ramp must not be empty"
        raise ValueError(msg)
    tips = np.array([_arc_tip(strip_curvature(v, cfg), cfg.length) for v in ramp])
    length = float(np.sum(np.linalg.norm(np.diff(tips, axis=0), axis=1)))
    return tips, length


# -----------------------------------------------------------------------------
# Plate
# -----------------------------------------------------------------------------


def _second_difference(n: int, h: float) -> sp.csr_matrix:
    """1-D second difference at every node; one-sided (shifted) at both ends."""
    rows, cols, vals = [], [], []
    for i in range(n):
        c = min(max(i, 1), n - 2)
        for k, w in ((c - 1, 1.0), (c, -2.0), (c + 1, 1.0)):
            rows.append(i)
            cols.append(k)
            vals.append(w / h**2)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _forward_difference(n: int, h: float) -> sp.csr_matrix:
    return sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n)) / h


def _trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[[0, -1]] = h / 2
    return w


def _coverage(cfg: PlateConfig) -> np.ndarray:
    """Fraction of each node's dual interval covered by each pixel's active band."""
    n, h = cfg.grid_n, cfg.spacing
    x = cfg.coordinates()
    lo = np.clip(x - h / 2, 0, cfg.side)
    hi = np.clip(x + h / 2, 0, cfg.side)
    offset = (cfg.side - cfg.pixels_per_side * cfg.pixel_pitch) / 2
    margin = (cfg.pixel_pitch - cfg.pixel_active) / 2
    starts = offset + margin + cfg.pixel_pitch * np.arange(cfg.pixels_per_side)
    ends = starts + cfg.pixel_active
    overlap = np.minimum(hi[:, None], ends[None, :]) - np.maximum(
        lo[:, None], starts[None, :]
    )
    cov = np.clip(overlap, 0, None) / (hi - lo)[:, None]
    assert cov.shape == (n, cfg.pixels_per_side)
    return cov


@dataclass(frozen=True)
class _PlateOperator:
    lu: spla.SuperLU
    kkt: sp.csc_matrix
    load: sp.csr_matrix  # eigencurvature (per node) → right-hand side
    coverage: np.ndarray
    n_unknowns: int


@lru_cache(maxsize=8)
def _plate_operator(cfg: PlateConfig) -> _PlateOperator:
    n, h, nu = cfg.grid_n, cfg.spacing, cfg.nu
    eye = sp.identity(n, format="csr")
    d2 = _second_difference(n, h)
    d1 = _forward_difference(n, h)

    # Unknowns are flattened row-major: index = iy·n + ix
    dxx = sp.kron(eye, d2, format="csr")
    dyy = sp.kron(d2, eye, format="csr")
    dxy = sp.kron(d1, d1, format="csr")
    wt = _trapezoid_weights(n, h)
    w_node = sp.diags(np.kron(wt, wt))
    w_cell = sp.diags(np.full((n - 1) ** 2, h * h))

    stiff = (
        dxx.T @ w_node @ dxx
        + dyy.T @ w_node @ dyy
        + nu * (dxx.T @ w_node @ dyy + dyy.T @ w_node @ dxx)
        + 2 * (1 - nu) * (dxy.T @ w_cell @ dxy)
    )
    load = ((1 + nu) * (dxx + dyy).T @ w_node).tocsr()

    # Clamp the centre node: w = 0 and both central-difference slopes 0
    c = n // 2
    centre = c * n + c
    constraint = sp.csr_matrix(
        (
            [1.0, 1.0, -1.0, 1.0, -1.0],
            ([0, 1, 1, 2, 2], [centre, centre + 1, centre - 1, centre + n, centre - n]),
        ),
        shape=(3, n * n),
    )
    kkt = sp.bmat([[stiff, constraint.T], [constraint, None]], format="csc")
    logger.debug("factorizing plate system with %d unknowns", kkt.shape[0])
    return _PlateOperator(spla.splu(kkt), kkt, load, _coverage(cfg), n * n)


def eigencurvature(v: VoltageGrid, cfg: PlateConfig) -> np.ndarray:
    """Per-node eigencurvature, weighted by active-pixel coverage of each node."""
    p = cfg.pixels_per_side
    if v.shape != (p, p):
        msg = f"voltage grid {v.shape} does not match {p}×{p} pixels"
        raise DimensionMismatch(msg)
    cov = _plate_operator(cfg).coverage
    return cfg.kappa_per_volt * (cov @ v.values @ cov.T)


def plate_solve(v: VoltageGrid, cfg: PlateConfig) -> Heightfield:
    """Deflection of the plate under pixel voltages ``v`` (rows along y)."""
    op = _plate_operator(cfg)
    m = eigencurvature(v, cfg).ravel()
    n = cfg.grid_n
    coords = cfg.coordinates()

    rhs = np.zeros(op.kkt.shape[0])
    rhs[: op.n_unknowns] = op.load @ m
    scale = np.linalg.norm(rhs)
    if scale == 0:
        w = np.zeros((n, n))
    else:
        sol = op.lu.solve(rhs)
        residual = float(np.linalg.norm(op.kkt @ sol - rhs) / scale)
        if not np.all(np.isfinite(sol)) or residual > PLATE_TOLERANCE:
            msg = "plate solve did not converge"
            raise SolverFailure(msg, residual)
        w = sol[: op.n_unknowns].reshape(n, n)

    half_t = cfg.thickness / 2
    w_y, w_x = np.gradient(w, cfg.spacing, cfg.spacing, edge_order=2)
    return Heightfield(coords, coords, w, -half_t * w_x, -half_t * w_y)


def sample_nodes(field: Heightfield, n: int = 20) -> Heightfield:
    """Bilinear resampling onto ``n × n`` uniform nodes over the same square.

    Samples always include both edges, so ``n`` runs from 2 up to the field's
    own node count.
    """
    ny, nx = field.shape
    if not 2 <= n <= min(nx, ny):
        msg = (
            f"cannot sample {n}×{n} nodes from a {ny}×{nx} field"
            f" (need 2 to {min(nx, ny)})"
        )
        raise ValueError(msg)
    xs = np.linspace(field.x[0], field.x[-1], n)
    ys = np.linspace(field.y[0], field.y[-1], n)
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    points = np.column_stack([yy.ravel(), xx.ravel()])

    def interp(values: np.ndarray) -> np.ndarray:
        f = RegularGridInterpolator((field.y, field.x), values, method="linear")
        return f(points).reshape(n, n)

    if field.dx is None or field.dy is None:
        return Heightfield(xs, ys, interp(field.z))
    return Heightfield(xs, ys, interp(field.z), interp(field.dx), interp(field.dy))


def plate_response_matrix(
    cfg: PlateConfig, n: int = 20
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Linear maps from flattened pixel voltages to sampled (z, dx, dy).

    Each matrix has shape ``(n², pixels²)``; column k is the response to 1 V on
    pixel k (row-major).
    """
    p = cfg.pixels_per_side
    cols: list[list[np.ndarray]] = [[], [], []]
    for k in range(p * p):
        unit = np.zeros(p * p)
        unit[k] = 1.0
        field = sample_nodes(plate_solve(VoltageGrid(unit.reshape(p, p)), cfg), n)
        assert field.dx is not None
        assert field.dy is not None
        for store, arr in zip(cols, (field.z, field.dx, field.dy), strict=True):
            store.append(arr.ravel())
    z, dx, dy = (np.column_stack(c) for c in cols)
    return z, dx, dy
