"""Heatmap export as plain-text Netpbm images (PGM P2 / PPM P3).

Output is deterministic: identical grids give byte-identical files.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from morphgrid.formats import write_atomic

if TYPE_CHECKING:
    from pathlib import Path

MAXVAL = 255
ROW_VALUES = 12  # values per text line


def _levels(t: np.ndarray) -> np.ndarray:
    """Map [0, 1] to 0..MAXVAL, rounding half up."""
    return np.floor(np.clip(t, 0.0, 1.0) * MAXVAL + 0.5).astype(int)


def _upscale(values: np.ndarray, cell: int) -> np.ndarray:
    if cell < 1:
        msg = f"cell size must be at least 1, got {cell}"
        raise ValueError(msg)
    return np.repeat(np.repeat(values, cell, axis=0), cell, axis=1)


def _body(pixels: np.ndarray) -> str:
    flat = [str(int(v)) for v in pixels.ravel()]
    lines = [" ".join(flat[k : k + ROW_VALUES]) for k in range(0, len(flat), ROW_VALUES)]
    return "\n".join(lines) + "\n"


def grid_to_pgm(
    values: np.ndarray,
    *,
    vmin: float | None = None,
    vmax: float | None = None,
    cell: int = 1,
    comment: str = "",
) -> str:
    """Render a 2-D array as a grayscale P2 image.

    Args:
        values: Grid to render, rows top to bottom.
        vmin: Value mapped to black (default: grid minimum).
        vmax: Value mapped to white (default: grid maximum).
        cell: Side of the square block of pixels drawn per grid entry.
        comment: Optional comment line written after the magic number.

    Returns:
        The image file contents. A constant grid renders black.

    """
    values = np.asarray(values, dtype=float)
    lo = float(values.min()) if vmin is None else vmin
    hi = float(values.max()) if vmax is None else vmax
    t = (values - lo) / (hi - lo) if hi > lo else np.zeros_like(values)
    pixels = _upscale(_levels(t), cell)
    height, width = pixels.shape
    head = "P2\n" + (f"# {comment}\n" if comment else "")
    return f"{head}{width} {height}\n{MAXVAL}\n" + _body(pixels)


def grid_to_ppm(
    values: np.ndarray,
    *,
    vmax: float | None = None,
    cell: int = 1,
    comment: str = "",
) -> str:
    """Render a signed grid as a blue-white-red P3 image.

    Zero is white, ``-vmax`` full blue, ``+vmax`` full red; ``vmax`` defaults to
    max|values|.
    """
    values = np.asarray(values, dtype=float)
    scale = float(np.max(np.abs(values))) if vmax is None else vmax
    t = values / scale if scale > 0 else np.zeros_like(values)
    t = np.clip(t, -1.0, 1.0)
    fade = _levels(1.0 - np.abs(t))
    full = np.full(t.shape, MAXVAL)
    red = np.where(t >= 0, full, fade)
    blue = np.where(t <= 0, full, fade)
    rgb = np.stack([red, fade, blue], axis=-1)
    rgb = np.stack([_upscale(rgb[..., k], cell) for k in range(3)], axis=-1)
    height, width = rgb.shape[:2]
    head = "P3\n" + (f"# {comment}\n" if comment else "")
    return f"{head}{width} {height}\n{MAXVAL}\n" + _body(rgb)


def write_pgm(values: np.ndarray, path: str | Path, **kwargs: object) -> None:
    write_atomic(path, grid_to_pgm(values, **kwargs))  # type: ignore[arg-type]


def write_ppm(values: np.ndarray, path: str | Path, **kwargs: object) -> None:
    write_atomic(path, grid_to_ppm(values, **kwargs))  # type: ignore[arg-type]
