"""Plain-text file formats: voltage grids, heightfields, scan traces.

All numeric values are written with 17 significant digits so that reading a
file back gives bit-identical floats. Files are written atomically.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .common import FormatError
from .crossbar import VoltageGrid
from .mechanics import Heightfield

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    from .scanner import ScanTrace

HEIGHTFIELD_COLUMNS = ("x", "y", "z")
COMPONENT_COLUMNS = ("x", "y", "z", "dx", "dy", "dz")


def format_value(value: float) -> str:
    return f"{value:.17g}"


def format_row(values: Iterable[float]) -> str:
    return ",".join(format_value(float(v)) for v in values)


def parse_row(text: str, line: int, expected: int | None = None) -> list[float]:
    """Parse one comma-separated line of floats, reporting the failing field."""
    fields = text.strip().split(",")
    if expected is not None and len(fields) != expected:
        msg = f"expected {expected} fields, got {len(fields)}"
        raise FormatError(msg, line=line)
    values = []
    for k, f in enumerate(fields, start=1):
        try:
            v = float(f)
        except ValueError:
            msg = f"not a number: {f.strip()!r}"
            raise FormatError(msg, line=line, field=k) from None
        if not np.isfinite(v):
            msg = f"non-finite value: {f.strip()!r}"
            raise FormatError(msg, line=line, field=k)
        values.append(v)
    return values


def write_atomic(path: str | Path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        Path(tmp).replace(path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def read_lines(path: str | Path) -> list[str]:
    try:
        return Path(path).read_text(encoding="utf-8").splitlines()
    except UnicodeDecodeError as e:
        msg = f"{path}: not a text file"
        raise FormatError(msg) from e


def split_header(lines: Sequence[str]) -> tuple[dict[str, str], list[tuple[int, str]]]:
    """Split ``# key=value`` header lines from numbered body lines.

    Comment lines without ``=`` are ignored; blank lines are skipped.
    """
    header: dict[str, str] = {}
    body: list[tuple[int, str]] = []
    for number, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text:
            continue
        if text.startswith("#"):
            key, sep, value = text[1:].partition("=")
            if sep and not body:
                header[key.strip()] = value.strip()
            continue
        body.append((number, text))
    return header, body


def header_block(items: dict[str, object]) -> str:
    return "".join(f"# {k}={v}\n" for k, v in items.items())


# -----------------------------------------------------------------------------
# Voltage grids
# -----------------------------------------------------------------------------


def read_grid(path: str | Path) -> VoltageGrid:
    """Read a voltage grid: one comma-separated row per line, ``#`` comments."""
    _, body = split_header(read_lines(path))
    if not body:
        msg = f"{path}: no grid rows"
        raise FormatError(msg)
    width = len(body[0][1].split(","))
    rows = [parse_row(text, number, width) for number, text in body]
    return VoltageGrid(np.array(rows))


def write_grid(grid: VoltageGrid, path: str | Path, comment: str = "") -> None:
    head = "".join(f"# {c}\n" for c in comment.splitlines())
    write_atomic(path, head + "".join(format_row(r) + "\n" for r in grid.values))


# -----------------------------------------------------------------------------
# Heightfields
# -----------------------------------------------------------------------------


def write_heightfield(field: Heightfield, path: str | Path) -> None:
    """CSV with one node per line, row-major (y outer, x inner)."""
    yy, xx = np.meshgrid(field.y, field.x, indexing="ij")
    columns = [xx.ravel(), yy.ravel(), field.z.ravel()]
    names = HEIGHTFIELD_COLUMNS
    if field.dx is not None and field.dy is not None:
        columns += [field.dx.ravel(), field.dy.ravel(), field.z.ravel()]
        names = COMPONENT_COLUMNS
    lines = [",".join(names)]
    lines += [format_row(r) for r in np.column_stack(columns)]
    write_atomic(path, "\n".join(lines) + "\n")


def read_heightfield(path: str | Path) -> Heightfield:
    lines = read_lines(path)
    if not lines:
        msg = f"{path}: empty file"
        raise FormatError(msg)
    names = tuple(c.strip() for c in lines[0].split(","))
    if names not in {HEIGHTFIELD_COLUMNS, COMPONENT_COLUMNS}:
        msg = f"unexpected heightfield header {lines[0]!r}"
        raise FormatError(msg, line=1)
    rows = [
        parse_row(text, number, len(names))
        for number, text in enumerate(lines[1:], start=2)
        if text.strip()
    ]
    if not rows:
        msg = f"{path}: no nodes"
        raise FormatError(msg)
    data = np.array(rows)
    ys = data[:, 1]
    nx = int(np.argmax(ys != ys[0])) or len(ys)
    if len(ys) % nx:
        msg = f"{len(ys)} nodes do not form rows of {nx}"
        raise FormatError(msg)
    ny = len(ys) // nx
    grid = data.reshape(ny, nx, len(names))
    x, y = grid[0, :, 0], grid[:, 0, 1]
    if not (np.all(grid[:, :, 0] == x) and np.all(grid[:, :, 1] == y[:, None])):
        msg = "x, y do not form a regular row-major grid"
        raise FormatError(msg)
    if len(names) == len(HEIGHTFIELD_COLUMNS):
        return Heightfield(x, y, grid[:, :, 2])
    return Heightfield(x, y, grid[:, :, 2], grid[:, :, 3], grid[:, :, 4])


def write_height_matrix(field: Heightfield, path: str | Path) -> None:
    """Square plain-text matrix of z (rows along y) for quick diffing."""
    text = "".join(
        " ".join(format_value(float(v)) for v in row) + "\n" for row in field.z
    )
    write_atomic(path, text)


# -----------------------------------------------------------------------------
# Scan traces
# -----------------------------------------------------------------------------


def write_trace(trace: ScanTrace, path: str | Path) -> None:
    """CSV with columns t, pixel_0_0 … (row-major), one line per sample."""
    _, n_rows, n_cols = trace.values.shape
    names = ["t"] + [f"pixel_{i}_{j}" for i in range(n_rows) for j in range(n_cols)]
    flat = trace.values.reshape(len(trace.times), -1)
    lines = [",".join(names)]
    lines += [format_row([t, *v]) for t, v in zip(trace.times, flat, strict=True)]
    write_atomic(path, "\n".join(lines) + "\n")
