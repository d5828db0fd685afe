"""Static (DC) electrical model of a passive-matrix crossbar actuator array.

Every pixel sits between a row electrode and a column electrode. It is modelled
as two series conductances joined at a membrane midpoint node so that lateral
ionic leakage can attach to the interior of the separator:

    row contact ─R─ r[i,0] ─R─ r[i,1] ─ … ─R─ r[i,N-1]
                       │2g
                     m[i,j] ── g_leak ── m[neighbour]
                       │2g
    col contact ─R─ c[0,j] ─R─ c[1,j] ─ … ─R─ c[N-1,j]

Contacts are either driven to a voltage or left floating.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import TYPE_CHECKING

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .common import (
    CalibrationError,
    DimensionMismatch,
    NotRepresentable,
    SingularSystem,
    SolverFailure,
    UnreachablePixel,
)

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

logger = logging.getLogger(__name__)

# Arrays up to this size are solved with a dense Cholesky factorization
DENSE_LIMIT = 16
KCL_TOLERANCE = 1e-9
REPRESENTABLE_TOLERANCE = 1e-9
FAR_CORNER_ATTENUATION = 0.796

# -----------------------------------------------------------------------------
# Data Types
# -----------------------------------------------------------------------------


@dataclass(frozen=True)
class CrossbarConfig:
    """Electrical parameters of an N×M crossbar array."""

    n_rows: int = 6
    n_cols: int = 6
    r_segment: float = 8.0  # Ω per electrode segment
    g_pixel: float = 1e-3  # S, through-thickness (series total)
    g_leak: float = 1e-4  # S, lateral between neighbouring midpoints
    blocker_factor: float = 1.0  # multiplier on g_leak, 1 = no blockers

    def __post_init__(self) -> None:
        if self.n_rows < 1 or self.n_cols < 1:
            msg = f"array must have at least one row and column, got {self.n_rows}x{self.n_cols}"
            raise ValueError(msg)
        if self.r_segment <= 0:
            msg = f"r_segment must be positive, got {self.r_segment}"
            raise ValueError(msg)
        if self.g_pixel <= 0:
            msg = f"g_pixel must be positive, got {self.g_pixel}"
            raise ValueError(msg)
        if self.g_leak < 0:
            msg = f"g_leak must be non-negative, got {self.g_leak}"
            raise ValueError(msg)
        if not 0 < self.blocker_factor <= 1:
            msg = f"blocker_factor must be in (0, 1], got {self.blocker_factor}"
            raise ValueError(msg)

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_rows, self.n_cols

    @property
    def g_leak_effective(self) -> float:
        """Leakage conductance after the blocker multiplier."""
        return self.g_leak * self.blocker_factor


@dataclass(frozen=True)
class DriveAssignment:
    """Contact states for one addressing step.

    Each entry is a voltage (driven) or ``None`` (floating).
    """

    rows: tuple[float | None, ...]
    cols: tuple[float | None, ...]

    def __post_init__(self) -> None:
        for value in (*self.rows, *self.cols):
            if value is not None and not np.isfinite(value):
                msg = f"driven contact voltage must be finite, got {value}"
                raise ValueError(msg)

    @classmethod
    def create(
        cls, rows: Iterable[float | None], cols: Iterable[float | None]
    ) -> DriveAssignment:
        """Build an assignment, coercing driven values to float."""
        return cls(
            rows=tuple(None if v is None else float(v) for v in rows),
            cols=tuple(None if v is None else float(v) for v in cols),
        )

    @classmethod
    def floating(cls, n_rows: int, n_cols: int) -> DriveAssignment:
        """All contacts floating."""
        return cls(rows=(None,) * n_rows, cols=(None,) * n_cols)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), len(self.cols)

    @property
    def row_driven(self) -> np.ndarray:
        return np.array([v is not None for v in self.rows])

    @property
    def col_driven(self) -> np.ndarray:
        return np.array([v is not None for v in self.cols])

    @property
    def any_driven(self) -> bool:
        return bool(self.row_driven.any() or self.col_driven.any())

    def row_values(self) -> np.ndarray:
        """Row voltages with NaN for floating contacts."""
        return np.array([np.nan if v is None else v for v in self.rows])

    def col_values(self) -> np.ndarray:
        """Column voltages with NaN for floating contacts."""
        return np.array([np.nan if v is None else v for v in self.cols])

    def scaled(self, factor: float) -> DriveAssignment:
        """Multiply every driven voltage by ``factor``."""
        return DriveAssignment.create(
            (None if v is None else v * factor for v in self.rows),
            (None if v is None else v * factor for v in self.cols),
        )


@dataclass(frozen=True)
class VoltageGrid:
    """Per-pixel voltages, rows × columns, in volts."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            msg = f"voltage grid must be two-dimensional, got shape {values.shape}"
            raise DimensionMismatch(msg)
        if not np.all(np.isfinite(values)):
            msg = "voltage grid contains non-finite values"
            raise ValueError(msg)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, n_rows: int, n_cols: int) -> VoltageGrid:
        return cls(np.zeros((n_rows, n_cols)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def flatten(self) -> np.ndarray:
        """Row-major vector, index k ↔ pixel (k // n_cols, k % n_cols)."""
        return self.values.ravel().copy()


@dataclass(frozen=True)
class NodePotentials:
    """Solved potential of every network node."""

    potentials: np.ndarray


@dataclass(frozen=True)
class ErrorStats:
    """Voltage error of a measured grid against its target."""

    mean_abs_error_pct: float
    max_abs_error_pct: float
    per_pixel_error: np.ndarray
    v_ref: float


@dataclass(frozen=True)
class AddressingCost:
    """Number of control inputs for an n×n array."""

    direct: int
    passive: int


@dataclass(frozen=True, eq=False)
class CrossbarNetwork:
    """Conductance graph of a crossbar array (immutable after build)."""

    cfg: CrossbarConfig
    edges: np.ndarray  # (E, 2) node index pairs
    conductances: np.ndarray  # (E,) siemens
    n_leak_edges: int
    n_nodes: int = field(init=False)

    def __post_init__(self) -> None:
        n_pix = self.cfg.n_rows * self.cfg.n_cols
        object.__setattr__(
            self, "n_nodes", 3 * n_pix + self.cfg.n_rows + self.cfg.n_cols
        )

    # Node numbering: row-side crossings, midpoints, column-side crossings,
    # row contacts, column contacts.

    def row_node(self, i: int, j: int) -> int:
        return i * self.cfg.n_cols + j

    def mid_node(self, i: int, j: int) -> int:
        return self.cfg.n_rows * self.cfg.n_cols + i * self.cfg.n_cols + j

    def col_node(self, i: int, j: int) -> int:
        return 2 * self.cfg.n_rows * self.cfg.n_cols + i * self.cfg.n_cols + j

    def row_contact(self, i: int) -> int:
        return 3 * self.cfg.n_rows * self.cfg.n_cols + i

    def col_contact(self, j: int) -> int:
        return 3 * self.cfg.n_rows * self.cfg.n_cols + self.cfg.n_rows + j

    @cached_property
    def laplacian(self) -> scipy.sparse.csr_matrix:
        """Weighted graph Laplacian (nodal conductance matrix)."""
        a, b = self.edges[:, 0], self.edges[:, 1]
        g = self.conductances
        rows = np.concatenate([a, b, a, b])
        cols = np.concatenate([b, a, a, b])
        vals = np.concatenate([-g, -g, g, g])
        return scipy.sparse.coo_matrix(
            (vals, (rows, cols)), shape=(self.n_nodes, self.n_nodes)
        ).tocsr()

    def branch_currents(self, pots: NodePotentials) -> np.ndarray:
        """Current through every edge, from ``edges[:, 0]`` to ``edges[:, 1]``."""
        v = pots.potentials
        return self.conductances * (v[self.edges[:, 0]] - v[self.edges[:, 1]])


# -----------------------------------------------------------------------------
# Network construction and solve
# -----------------------------------------------------------------------------


def build_network(cfg: CrossbarConfig) -> CrossbarNetwork:
    """Assemble the conductance graph for ``cfg``."""
    nr, nc = cfg.n_rows, cfg.n_cols
    n_pix = nr * nc
    idx = np.arange(n_pix).reshape(nr, nc)
    r_nodes, m_nodes, c_nodes = idx, idx + n_pix, idx + 2 * n_pix
    row_contacts = 3 * n_pix + np.arange(nr)
    col_contacts = 3 * n_pix + nr + np.arange(nc)
    g_seg = 1.0 / cfg.r_segment

    pairs: list[np.ndarray] = []
    values: list[np.ndarray] = []

    def add(a: np.ndarray, b: np.ndarray, g: float) -> None:
        a, b = np.ravel(a), np.ravel(b)
        pairs.append(np.column_stack([a, b]))
        values.append(np.full(a.size, g))

    # Through-thickness halves of each pixel
    add(r_nodes, m_nodes, 2.0 * cfg.g_pixel)
    add(m_nodes, c_nodes, 2.0 * cfg.g_pixel)

    # Row electrode chains: contact → r[i,0] → … → r[i,N-1]
    add(row_contacts, r_nodes[:, 0], g_seg)
    add(r_nodes[:, :-1], r_nodes[:, 1:], g_seg)

    # Column electrode chains: contact → c[0,j] → … → c[N-1,j]
    add(col_contacts, c_nodes[0, :], g_seg)
    add(c_nodes[:-1, :], c_nodes[1:, :], g_seg)

    # Lateral leakage between 4-neighbour midpoints
    n_before = sum(p.shape[0] for p in pairs)
    add(m_nodes[:, :-1], m_nodes[:, 1:], cfg.g_leak_effective)
    add(m_nodes[:-1, :], m_nodes[1:, :], cfg.g_leak_effective)
    n_leak = sum(p.shape[0] for p in pairs) - n_before

    edges = np.concatenate(pairs).astype(np.intp)
    conductances = np.concatenate(values)
    edges.setflags(write=False)
    conductances.setflags(write=False)
    return CrossbarNetwork(
        cfg=cfg, edges=edges, conductances=conductances, n_leak_edges=n_leak
    )


def _driven_values(net: CrossbarNetwork, drive: DriveAssignment) -> np.ndarray:
    """Node vector holding drive voltages at driven contacts, NaN elsewhere."""
    if drive.shape != net.cfg.shape:
        msg = f"drive shape {drive.shape} does not match array {net.cfg.shape}"
        raise DimensionMismatch(msg)
    values = np.full(net.n_nodes, np.nan)
    for i, v in enumerate(drive.rows):
        if v is not None:
            values[net.row_contact(i)] = v
    for j, v in enumerate(drive.cols):
        if v is not None:
            values[net.col_contact(j)] = v
    return values


def solve_dc(net: CrossbarNetwork, drive: DriveAssignment) -> NodePotentials:
    """Solve node potentials by nodal analysis with driven contacts pinned.

    Floating contacts are ordinary nodes with no external current.
    """
    values = _driven_values(net, drive)
    driven = ~np.isnan(values)
    if not driven.any():
        msg = "no driven contact: potentials are undetermined"
        raise SingularSystem(msg)

    lap = net.laplacian
    free = ~driven
    lap_free = lap[free][:, free]
    rhs = -(lap[free][:, driven] @ values[driven])

    if max(net.cfg.shape) <= DENSE_LIMIT:
        x_free = scipy.linalg.solve(lap_free.toarray(), rhs, assume_a="pos")
    else:
        diag = lap_free.diagonal()
        precond = scipy.sparse.linalg.LinearOperator(
            lap_free.shape, matvec=lambda r: r / diag
        )
        x_free, info = scipy.sparse.linalg.cg(
            lap_free, rhs, rtol=1e-13, maxiter=20 * lap_free.shape[0], M=precond
        )
        if info != 0:
            resid = float(np.max(np.abs(lap_free @ x_free - rhs), initial=0.0))
            msg = f"conjugate gradient did not converge after {info} iterations"
            raise SolverFailure(msg, resid)

    potentials = values.copy()
    potentials[free] = x_free

    # Residual scaled by the magnitude of the terms it balances
    terms = abs(lap) @ np.abs(potentials)
    imbalance = np.abs(lap @ potentials)[free]
    scale = float(np.max(terms[free], initial=0.0))
    resid = float(np.max(imbalance, initial=0.0))
    if scale > 0 and resid > KCL_TOLERANCE * scale:
        msg = "nodal solve violates Kirchhoff's current law"
        raise SolverFailure(msg, resid / scale)

    potentials.setflags(write=False)
    return NodePotentials(potentials=potentials)


def kcl_residual(
    net: CrossbarNetwork, pots: NodePotentials, drive: DriveAssignment
) -> float:
    """Largest current imbalance at a non-driven node, relative to the largest branch current."""
    driven = ~np.isnan(_driven_values(net, drive))
    imbalance = np.abs(net.laplacian @ pots.potentials)[~driven]
    largest = float(np.max(np.abs(net.branch_currents(pots)), initial=0.0))
    if largest == 0:
        return float(np.max(imbalance, initial=0.0))
    return float(np.max(imbalance, initial=0.0)) / largest


def pixel_voltages(net: CrossbarNetwork, pots: NodePotentials) -> VoltageGrid:
    """Voltage across each pixel, row-side minus column-side crossing."""
    nr, nc = net.cfg.shape
    n_pix = nr * nc
    v = pots.potentials
    return VoltageGrid((v[:n_pix] - v[2 * n_pix : 3 * n_pix]).reshape(nr, nc))


# -----------------------------------------------------------------------------
# Addressing analysis
# -----------------------------------------------------------------------------


def dpa_representable(target: VoltageGrid) -> bool:
    """Whether ``target`` equals row_i − col_j for some row and column vectors."""
    t = target.values
    defect = t - t[:, :1] - t[:1, :] + t[0, 0]
    return bool(np.all(np.abs(defect) <= REPRESENTABLE_TOLERANCE))


def dpa_drive(target: VoltageGrid) -> DriveAssignment:
    """Contact assignment that produces ``target`` by direct passive addressing.

    Rows and columns without a non-zero pixel float. The remaining sub-block
    must be representable; the drive is centred about 0 V.
    """
    t = target.values
    active = np.abs(t) > REPRESENTABLE_TOLERANCE
    if not active.any():
        return DriveAssignment.create([0.0] * t.shape[0], [0.0] * t.shape[1])

    rows = np.flatnonzero(active.any(axis=1))
    cols = np.flatnonzero(active.any(axis=0))
    block = t[np.ix_(rows, cols)]
    if not dpa_representable(VoltageGrid(block)):
        msg = "target is not a row-minus-column pattern on its active lines"
        raise NotRepresentable(msg)

    # block[a, b] = r[a] - c[b], gauge c[0] = 0
    r = block[:, 0]
    c = block[0, 0] - block[0, :]
    offset = (max(r.max(), c.max()) + min(r.min(), c.min())) / 2
    row_v: list[float | None] = [None] * t.shape[0]
    col_v: list[float | None] = [None] * t.shape[1]
    for a, i in enumerate(rows):
        row_v[i] = float(r[a] - offset)
    for b, j in enumerate(cols):
        col_v[j] = float(c[b] - offset)
    return DriveAssignment.create(row_v, col_v)


def probe_drive(cfg: CrossbarConfig, i: int, j: int, volts: float) -> DriveAssignment:
    """Drive row ``i`` to ``volts`` and column ``j`` to 0 V, all else floating."""
    rows: list[float | None] = [None] * cfg.n_rows
    cols: list[float | None] = [None] * cfg.n_cols
    rows[i] = volts
    cols[j] = 0.0
    return DriveAssignment.create(rows, cols)


def attenuation_map(net: CrossbarNetwork, probe_volts: float = 1.0) -> np.ndarray:
    """Fraction of a single-pixel probe voltage that reaches each pixel."""
    if probe_volts == 0:
        msg = "probe voltage must be non-zero"
        raise ValueError(msg)
    nr, nc = net.cfg.shape
    att = np.empty((nr, nc))
    for i in range(nr):
        for j in range(nc):
            pots = solve_dc(net, probe_drive(net.cfg, i, j, probe_volts))
            att[i, j] = pixel_voltages(net, pots).values[i, j] / probe_volts
    return att


def far_corner_attenuation(cfg: CrossbarConfig) -> float:
    """Attenuation of the pixel with the longest electrodes."""
    net = build_network(cfg)
    i, j = cfg.n_rows - 1, cfg.n_cols - 1
    pots = solve_dc(net, probe_drive(cfg, i, j, 1.0))
    return float(pixel_voltages(net, pots).values[i, j])


def calibrate_electrodes(
    cfg: CrossbarConfig,
    far_corner: float = FAR_CORNER_ATTENUATION,
    *,
    tol: float = 1e-7,
    max_iter: int = 200,
) -> CrossbarConfig:
    """Choose ``r_segment`` so the far-corner attenuation equals ``far_corner``.

    Bisects on log(r_segment) with g_pixel held fixed.
    """
    if not 0 < far_corner < 1:
        msg = f"far-corner attenuation must be in (0, 1), got {far_corner}"
        raise CalibrationError(msg)

    def att(log_r: float) -> float:
        return far_corner_attenuation(replace(cfg, r_segment=float(np.exp(log_r))))

    lo = float(np.log(1e-9 / cfg.g_pixel))
    hi = float(np.log(1.0 / cfg.g_pixel))
    for _ in range(60):
        if att(hi) < far_corner:
            break
        hi += np.log(10.0)
    else:
        msg = f"cannot reach far-corner attenuation {far_corner}"
        raise CalibrationError(msg)
    if att(lo) <= far_corner:
        msg = f"far-corner attenuation {far_corner} is above the ideal-electrode limit"
        raise CalibrationError(msg)

    for _ in range(max_iter):
        mid = (lo + hi) / 2
        value = att(mid)
        if abs(value - far_corner) < tol:
            break
        if value > far_corner:
            lo = mid
        else:
            hi = mid
    r_segment = float(np.exp((lo + hi) / 2))
    logger.debug("calibrated r_segment=%.6g Ω for far corner %.4f", r_segment, far_corner)
    return replace(cfg, r_segment=r_segment)


def compensate(target: VoltageGrid, att: np.ndarray) -> VoltageGrid:
    """Pre-scale ``target`` so that attenuated pixels land on it."""
    att = np.asarray(att, dtype=float)
    if att.shape != target.shape:
        msg = f"attenuation shape {att.shape} does not match target {target.shape}"
        raise DimensionMismatch(msg)
    if np.any(att == 0):
        msg = "attenuation map contains a zero entry"
        raise UnreachablePixel(msg)
    return VoltageGrid(target.values / att)


def voltage_error(
    measured: VoltageGrid, target: VoltageGrid, v_ref: float | None = None
) -> ErrorStats:
    """Mean and max absolute voltage error as a percentage of ``v_ref``.

    ``v_ref`` defaults to max|target| (1 V for an all-zero target).
    """
    if measured.shape != target.shape:
        msg = f"measured shape {measured.shape} does not match target {target.shape}"
        raise DimensionMismatch(msg)
    if v_ref is None:
        v_ref = float(np.max(np.abs(target.values))) or 1.0
    if v_ref <= 0:
        msg = f"v_ref must be positive, got {v_ref}"
        raise ValueError(msg)
    err = measured.values - target.values
    return ErrorStats(
        mean_abs_error_pct=100.0 * float(np.mean(np.abs(err))) / v_ref,
        max_abs_error_pct=100.0 * float(np.max(np.abs(err))) / v_ref,
        per_pixel_error=err,
        v_ref=v_ref,
    )


def addressing_complexity(n: int) -> AddressingCost:
    """Control inputs for direct (n²) versus passive matrix (2n) addressing."""
    if n < 1:
        msg = f"array size must be at least 1, got {n}"
        raise ValueError(msg)
    return AddressingCost(direct=n * n, passive=2 * n)


def grid_from_rows(rows: Sequence[Sequence[float]]) -> VoltageGrid:
    """Convenience constructor from nested sequences."""
    return VoltageGrid(np.array(rows, dtype=float))
