"""Training corpora: random lattice voltage grids and their simulated surfaces."""

from __future__ import annotations

import hashlib
import json
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import TYPE_CHECKING, Literal

import numpy as np

from .common import FingerprintMismatch, FormatError, RepairFailure
from .crossbar import VoltageGrid
from .formats import format_row, header_block, parse_row, read_lines, split_header, write_atomic
from .mechanics import Heightfield, PlateConfig, plate_response_matrix

if TYPE_CHECKING:
    from collections.abc import Iterator
    from pathlib import Path

logger = logging.getLogger(__name__)

Mode = Literal["z", "total"]
MODES: tuple[Mode, ...] = ("z", "total")

LEVELS = 20  # lattice steps per volt
LATTICE = np.arange(-LEVELS, LEVELS + 1) / LEVELS  # −1.00, −0.95, …, 1.00
MAX_REPAIRS = 10_000
DEFAULT_NODES = 20

# -----------------------------------------------------------------------------
# Data Types
# -----------------------------------------------------------------------------


@dataclass(frozen=True)
class Sample:
    voltages: np.ndarray
    displacement: np.ndarray


@dataclass(frozen=True)
class DatasetMeta:
    mode: Mode
    n_samples: int
    grid_n: int
    seed: int
    fingerprint: str
    adjacency_cap: float | None = None


@dataclass(frozen=True)
class Dataset:
    """Voltages ``(n, pixels)`` and displacements ``(n, grid_n²)``, row-major."""

    voltages: np.ndarray
    displacements: np.ndarray
    meta: DatasetMeta

    def __post_init__(self) -> None:
        n = self.meta.n_samples
        if self.voltages.shape[0] != n or self.displacements.shape[0] != n:
            msg = f"dataset holds {self.voltages.shape[0]} rows, meta says {n}"
            raise ValueError(msg)
        if self.displacements.shape[1] != self.meta.grid_n**2:
            msg = "displacement length does not match grid_n"
            raise ValueError(msg)

    def __len__(self) -> int:
        return self.meta.n_samples

    def __iter__(self) -> Iterator[Sample]:
        for v, d in zip(self.voltages, self.displacements, strict=True):
            yield Sample(v, d)

    def split(self, n_first: int) -> tuple[Dataset, Dataset]:
        """First ``n_first`` samples and the rest, sharing meta fields."""

        def part(sl: slice) -> Dataset:
            v = self.voltages[sl]
            meta = DatasetMeta(**{**asdict(self.meta), "n_samples": len(v)})
            return Dataset(v, self.displacements[sl], meta)

        return part(slice(None, n_first)), part(slice(n_first, None))


# -----------------------------------------------------------------------------
# Main Public API
# -----------------------------------------------------------------------------


def sample_seed(seed: int, index: int) -> np.random.SeedSequence:
    """Independent seed for sample ``index``, so samples can be drawn in any order."""
    return np.random.SeedSequence(seed, spawn_key=(index,))


def _violations(k: np.ndarray, limit: float) -> np.ndarray:
    bad = np.zeros(k.shape, dtype=bool)
    dh = np.abs(np.diff(k, axis=1)) >= limit
    dv = np.abs(np.diff(k, axis=0)) >= limit
    bad[:, :-1] |= dh
    bad[:, 1:] |= dh
    bad[:-1, :] |= dv
    bad[1:, :] |= dv
    return bad


def random_voltage_grid(
    seed: int | np.random.SeedSequence,
    adjacency_cap: float | None = None,
    *,
    shape: tuple[int, int] = (6, 6),
    max_repairs: int = MAX_REPAIRS,
) -> VoltageGrid:
    """Uniform draw per pixel from the 41-level lattice.

    With ``adjacency_cap``, offending pixels are redrawn (from values compatible
    with their neighbours when any exist) until every 4-neighbour difference is
    strictly below the cap.
    """
    rng = np.random.default_rng(seed)
    k = rng.integers(-LEVELS, LEVELS + 1, size=shape)
    if adjacency_cap is None:
        return VoltageGrid(k / LEVELS)
    if adjacency_cap <= 0:
        msg = f"adjacency cap must be positive, got {adjacency_cap}"
        raise ValueError(msg)
    # Work on integer lattice indices to keep comparisons exact
    limit = adjacency_cap * LEVELS - 1e-9
    if limit <= 1 and k.size > 1:
        msg = f"adjacency cap {adjacency_cap} V leaves no room between lattice levels"
        raise RepairFailure(msg)

    levels = np.arange(-LEVELS, LEVELS + 1)
    n_rows, n_cols = shape
    for attempt in range(max_repairs + 1):
        bad = _violations(k, limit)
        if not bad.any():
            return VoltageGrid(k / LEVELS)
        if attempt == max_repairs:
            break
        candidates = np.argwhere(bad)
        i, j = candidates[rng.integers(len(candidates))]
        neighbours = [
            k[a, b]
            for a, b in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1))
            if 0 <= a < n_rows and 0 <= b < n_cols
        ]
        ok = np.all(np.abs(levels[:, None] - np.array(neighbours)) < limit, axis=1)
        pool = levels[ok] if ok.any() else levels
        k[i, j] = rng.choice(pool)
    msg = f"adjacency cap {adjacency_cap} V not met after {max_repairs} repairs"
    raise RepairFailure(msg)


def vectorize_surface(field: Heightfield, mode: Mode = "z") -> np.ndarray:
    """Row-major node vector: z, or total displacement magnitude."""
    if mode == "z":
        return field.z.ravel().copy()
    if mode == "total":
        return field.total().ravel()
    msg = f"unknown displacement mode {mode!r}"
    raise ValueError(msg)


def fingerprint(
    plate: PlateConfig, mode: Mode, grid_n: int, adjacency_cap: float | None
) -> str:
    """Short hash of everything that determines a sample given its seed."""
    payload = {
        "plate": asdict(plate),
        "mode": mode,
        "grid_n": grid_n,
        "adjacency_cap": adjacency_cap,
    }
    text = json.dumps(payload, sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def generate(
    n_samples: int,
    seed: int,
    plate: PlateConfig,
    mode: Mode = "z",
    *,
    grid_n: int = DEFAULT_NODES,
    adjacency_cap: float | None = None,
    workers: int = 1,
) -> Dataset:
    """Draw ``n_samples`` grids and simulate their sampled surfaces.

    The plate is linear, so each surface is computed from the per-pixel
    response matrix; this equals plate_solve followed by sample_nodes.
    """
    if n_samples < 1:
        msg = f"n_samples must be at least 1, got {n_samples}"
        raise ValueError(msg)
    if mode not in MODES:
        msg = f"unknown displacement mode {mode!r}"
        raise ValueError(msg)
    p = plate.pixels_per_side

    def draw(index: int) -> np.ndarray:
        grid = random_voltage_grid(sample_seed(seed, index), adjacency_cap, shape=(p, p))
        return grid.flatten()

    with ThreadPoolExecutor(max_workers=max(workers, 1)) as pool:
        voltages = np.array(list(pool.map(draw, range(n_samples))))

    resp_z, resp_dx, resp_dy = plate_response_matrix(plate, grid_n)
    z = voltages @ resp_z.T
    if mode == "z":
        disp = z
    else:
        disp = np.sqrt((voltages @ resp_dx.T) ** 2 + (voltages @ resp_dy.T) ** 2 + z**2)

    meta = DatasetMeta(
        mode=mode,
        n_samples=n_samples,
        grid_n=grid_n,
        seed=seed,
        fingerprint=fingerprint(plate, mode, grid_n, adjacency_cap),
        adjacency_cap=adjacency_cap,
    )
    logger.info("generated %d %s-mode samples (seed %d)", n_samples, mode, seed)
    return Dataset(voltages, disp, meta)


# -----------------------------------------------------------------------------
# Persistence
# -----------------------------------------------------------------------------


def save(dataset: Dataset, path: str | Path) -> None:
    meta = dataset.meta
    head = header_block(
        {
            "mode": meta.mode,
            "seed": meta.seed,
            "n_samples": meta.n_samples,
            "pixels": dataset.voltages.shape[1],
            "grid_n": meta.grid_n,
            "adjacency_cap": "none" if meta.adjacency_cap is None else meta.adjacency_cap,
            "fingerprint": meta.fingerprint,
        }
    )
    rows = np.hstack([dataset.voltages, dataset.displacements])
    write_atomic(path, head + "".join(format_row(r) + "\n" for r in rows))


def _header_int(header: dict[str, str], key: str) -> int:
    try:
        return int(header[key])
    except KeyError:
        msg = f"missing header field {key!r}"
        raise FormatError(msg) from None
    except ValueError:
        msg = f"header field {key!r} is not an integer: {header[key]!r}"
        raise FormatError(msg) from None


def load(path: str | Path, *, expected_fingerprint: str | None = None) -> Dataset:
    """Read a dataset file; warn if it was produced by another configuration."""
    header, body = split_header(read_lines(path))
    mode = header.get("mode")
    if mode not in MODES:
        msg = f"missing or unknown mode {mode!r}"
        raise FormatError(msg)
    n_samples = _header_int(header, "n_samples")
    pixels = _header_int(header, "pixels")
    grid_n = _header_int(header, "grid_n")
    seed = _header_int(header, "seed")
    cap_text = header.get("adjacency_cap", "none")
    try:
        cap = None if cap_text == "none" else float(cap_text)
    except ValueError:
        msg = f"bad adjacency_cap {cap_text!r}"
        raise FormatError(msg) from None
    if "fingerprint" not in header:
        msg = "missing header field 'fingerprint'"
        raise FormatError(msg)

    if len(body) != n_samples:
        line = body[-1][0] if body else None
        msg = f"expected {n_samples} samples, found {len(body)}"
        raise FormatError(msg, line=line)
    width = pixels + grid_n**2
    rows = np.array([parse_row(text, number, width) for number, text in body])
    rows = rows.reshape(n_samples, width)

    meta = DatasetMeta(mode, n_samples, grid_n, seed, header["fingerprint"], cap)  # type: ignore[arg-type]
    if expected_fingerprint is not None and meta.fingerprint != expected_fingerprint:
        warnings.warn(
            f"{path}: fingerprint {meta.fingerprint} differs from "
            f"current configuration {expected_fingerprint}",
            FingerprintMismatch,
            stacklevel=2,
        )
    return Dataset(rows[:, :pixels], rows[:, pixels:], meta)
