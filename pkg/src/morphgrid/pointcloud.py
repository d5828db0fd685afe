"""Compare a measured surface with a simulated one.

Pipeline: crop → fit a plane → rotate it flat → match points by x-y →
z-error statistics.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.transform import Rotation

from .common import DegenerateCloud, DimensionMismatch, FormatError, XYMismatch
from .formats import format_value, read_lines, write_atomic

if TYPE_CHECKING:
    from pathlib import Path

    from .mechanics import Heightfield

logger = logging.getLogger(__name__)

Z_AXIS = np.array([0.0, 0.0, 1.0])
XY_TOLERANCE = 1e-6  # mm
DEFAULT_BINS = 20

# -----------------------------------------------------------------------------
# Data Types
# -----------------------------------------------------------------------------


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray  # (n, 3), mm

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            msg = f"points must have shape (n, 3), got {pts.shape}"
            raise DimensionMismatch(msg)
        if not np.all(np.isfinite(pts)):
            msg = "point coordinates must be finite"
            raise ValueError(msg)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def xy(self) -> np.ndarray:
        return self.points[:, :2]

    @property
    def z(self) -> np.ndarray:
        return self.points[:, 2]


@dataclass(frozen=True)
class Plane:
    """Plane ``normal · p = offset`` through ``centroid``."""

    normal: np.ndarray
    offset: float
    centroid: np.ndarray


@dataclass(frozen=True)
class BoundingBox:
    xmin: float = -math.inf
    xmax: float = math.inf
    ymin: float = -math.inf
    ymax: float = math.inf
    zmin: float = -math.inf
    zmax: float = math.inf

    @classmethod
    def parse(cls, text: str) -> BoundingBox:
        """``xmin,xmax,ymin,ymax[,zmin,zmax]``."""
        try:
            values = [float(v) for v in text.split(",")]
        except ValueError:
            msg = f"bad bounding box {text!r}"
            raise ValueError(msg) from None
        if len(values) not in {4, 6}:
            msg = f"bounding box needs 4 or 6 values, got {len(values)}"
            raise ValueError(msg)
        return cls(*values)

    def contains(self, points: np.ndarray) -> np.ndarray:
        lo = np.array([self.xmin, self.ymin, self.zmin])
        hi = np.array([self.xmax, self.ymax, self.zmax])
        return np.all((points >= lo) & (points <= hi), axis=1)


@dataclass(frozen=True)
class Matches:
    points: np.ndarray  # (m, 3) matched cloud points
    indices: np.ndarray  # (m,) cloud indices
    distances: np.ndarray  # (m,) x-y distances

    @property
    def max_distance(self) -> float:
        return float(self.distances.max()) if len(self.distances) else 0.0


@dataclass(frozen=True)
class SurfaceErrorReport:
    """Signed z errors ``a − b`` and their statistics (mm unless noted)."""

    signed: np.ndarray
    mean_abs: float
    mse: float  # mm²
    mse_rm: float  # root of mse, mm
    max_abs: float
    histogram: tuple[np.ndarray, np.ndarray]  # counts, bin edges
    pct_of_max_height: float
    max_match_distance: float = 0.0

    @property
    def count(self) -> int:
        return len(self.signed)


# -----------------------------------------------------------------------------
# Main Public API
# -----------------------------------------------------------------------------


def fit_plane(cloud: PointCloud) -> Plane:
    """Orthogonal-distance least-squares plane.

    The normal points toward +z (then +x, then +y when the earlier components
    vanish).
    """
    if len(cloud) < 3:
        msg = f"plane fit needs at least 3 points, got {len(cloud)}"
        raise DegenerateCloud(msg)
    centroid = cloud.points.mean(axis=0)
    _, s, vt = np.linalg.svd(cloud.points - centroid, full_matrices=False)
    if s[0] == 0 or s[1] <= 1e-12 * s[0]:
        msg = "points are collinear or coincident"
        raise DegenerateCloud(msg)
    normal = vt[2] / np.linalg.norm(vt[2])
    for component in (2, 0, 1):
        if abs(normal[component]) > 1e-15:
            if normal[component] < 0:
                normal = -normal
            break
    return Plane(normal, float(normal @ centroid), centroid)


def align_to_plane(cloud: PointCloud, plane: Plane) -> PointCloud:
    """Rotate so the plane is horizontal, about its centroid; centroid z → 0."""
    axis = np.cross(plane.normal, Z_AXIS)
    sin = np.linalg.norm(axis)
    angle = math.atan2(sin, float(plane.normal @ Z_AXIS))
    c = plane.centroid
    shifted = cloud.points - c
    if sin > 1e-15:
        shifted = Rotation.from_rotvec(axis / sin * angle).apply(shifted)
    elif angle > math.pi / 2:
        shifted = Rotation.from_rotvec([math.pi, 0.0, 0.0]).apply(shifted)
    return PointCloud(shifted + np.array([c[0], c[1], 0.0]))


def match_by_xy(reference_xy: np.ndarray, cloud: PointCloud) -> Matches:
    """Nearest cloud point (in x-y) to every reference position; ties → lowest index."""
    if len(cloud) == 0:
        msg = "cannot match against an empty cloud"
        raise ValueError(msg)
    ref = np.asarray(reference_xy, dtype=float).reshape(-1, 2)
    xy = cloud.xy
    tree = cKDTree(xy)
    dist, idx = tree.query(ref, k=1)
    idx = np.asarray(idx, dtype=int)

    # The tree may return any of several equidistant points
    balls = tree.query_ball_point(ref, r=dist * (1 + 1e-9) + 1e-12)
    for m, candidates in enumerate(balls):
        if len(candidates) > 1:
            cand = np.array(sorted(candidates))
            d2 = np.sum((xy[cand] - ref[m]) ** 2, axis=1)
            idx[m] = cand[np.flatnonzero(d2 == d2.min())[0]]
    distances = np.sqrt(np.sum((xy[idx] - ref) ** 2, axis=1))
    return Matches(cloud.points[idx], idx, distances)


def surface_error(
    a: np.ndarray | PointCloud,
    b: np.ndarray | PointCloud,
    *,
    xy_tolerance: float = XY_TOLERANCE,
    bins: int = DEFAULT_BINS,
) -> SurfaceErrorReport:
    """Statistics of ``z_a − z_b`` over points matched one-to-one."""
    pa = a.points if isinstance(a, PointCloud) else np.asarray(a, dtype=float)
    pb = b.points if isinstance(b, PointCloud) else np.asarray(b, dtype=float)
    if pa.shape != pb.shape or pa.ndim != 2 or pa.shape[1] != 3:
        msg = f"matched point sets differ: {pa.shape} vs {pb.shape}"
        raise DimensionMismatch(msg)
    if len(pa) == 0:
        msg = "no matched points"
        raise DimensionMismatch(msg)
    gap = float(np.max(np.linalg.norm(pa[:, :2] - pb[:, :2], axis=1)))
    if gap > xy_tolerance:
        msg = f"x-y positions differ by up to {gap:.3g} mm"
        raise XYMismatch(msg)

    signed = pa[:, 2] - pb[:, 2]
    abs_err = np.abs(signed)
    mean_abs = float(abs_err.mean())
    mse = float(np.mean(signed**2))
    height = float(np.ptp(pb[:, 2]))
    if height > 0:
        pct = 100.0 * mean_abs / height
    else:
        pct = 0.0 if mean_abs == 0 else math.inf
    return SurfaceErrorReport(
        signed=signed,
        mean_abs=mean_abs,
        mse=mse,
        mse_rm=math.sqrt(mse),
        max_abs=float(abs_err.max()),
        histogram=np.histogram(signed, bins=bins),
        pct_of_max_height=pct,
        max_match_distance=gap,
    )


def crop(cloud: PointCloud, bbox: BoundingBox) -> PointCloud:
    return PointCloud(cloud.points[bbox.contains(cloud.points)])


def heightfield_to_cloud(field: Heightfield) -> PointCloud:
    yy, xx = np.meshgrid(field.y, field.x, indexing="ij")
    return PointCloud(np.column_stack([xx.ravel(), yy.ravel(), field.z.ravel()]))


def compare_surfaces(
    measured: PointCloud,
    reference: Heightfield,
    *,
    bbox: BoundingBox | None = None,
    bins: int = DEFAULT_BINS,
) -> SurfaceErrorReport:
    """Level both surfaces, pick the measured point nearest each reference node,
    and report measured − reference z errors."""
    if bbox is not None:
        measured = crop(measured, bbox)
        logger.debug("%d points left after cropping", len(measured))
    flat_measured = align_to_plane(measured, fit_plane(measured))
    ref_cloud = heightfield_to_cloud(reference)
    flat_ref = align_to_plane(ref_cloud, fit_plane(ref_cloud))

    matches = match_by_xy(flat_ref.xy, flat_measured)
    paired = np.column_stack([flat_ref.xy, matches.points[:, 2]])
    report = surface_error(paired, flat_ref.points, bins=bins)
    logger.info(
        "surface error: mean |dz| %.3f mm, max match distance %.3f mm",
        report.mean_abs,
        matches.max_distance,
    )
    return replace(report, max_match_distance=matches.max_distance)


# -----------------------------------------------------------------------------
# I/O
# -----------------------------------------------------------------------------

_SEPARATORS = re.compile(r"[,\s]+")


def read_xyz(path: str | Path) -> PointCloud:
    """Read ``x y z`` per line (whitespace or comma separated; extra columns ignored)."""
    points = []
    for number, raw in enumerate(read_lines(path), start=1):
        text = raw.strip()
        if not text or text.startswith("#"):
            continue
        fields = _SEPARATORS.split(text)
        if len(fields) < 3:
            msg = f"expected x y z, got {len(fields)} fields"
            raise FormatError(msg, line=number)
        row = []
        for k, f in enumerate(fields[:3], start=1):
            try:
                row.append(float(f))
            except ValueError:
                msg = f"not a number: {f!r}"
                raise FormatError(msg, line=number, field=k) from None
        points.append(row)
    return PointCloud(np.array(points).reshape(-1, 3))


def write_xyz(cloud: PointCloud, path: str | Path) -> None:
    text = "".join(" ".join(format_value(float(v)) for v in p) + "\n" for p in cloud.points)
    write_atomic(path, text)
