"""Text summaries and rich tables for experiment results."""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
from rich.table import Table

from morphgrid.crossbar import addressing_complexity
from morphgrid.formats import write_atomic

if TYPE_CHECKING:
    from collections.abc import Iterable, Mapping, Sequence
    from pathlib import Path

    from morphgrid.crossbar import ErrorStats, VoltageGrid
    from morphgrid.mlp import CurvePoint
    from morphgrid.pointcloud import SurfaceErrorReport

Summary = dict[str, object]


def _fmt(value: object) -> str:
    if isinstance(value, float | np.floating):
        return f"{float(value):.6g}"
    return str(value)


def format_summary(items: Mapping[str, object]) -> str:
    """``key: value`` lines."""
    return "".join(f"{k}: {_fmt(v)}\n" for k, v in items.items())


def write_summary(items: Mapping[str, object], path: str | Path) -> None:
    write_atomic(path, format_summary(items))


def grid_summary(grid: VoltageGrid, prefix: str = "") -> Summary:
    v = grid.values
    return {
        f"{prefix}shape": f"{v.shape[0]}x{v.shape[1]}",
        f"{prefix}min": float(v.min()),
        f"{prefix}max": float(v.max()),
        f"{prefix}mean": float(v.mean()),
    }


def error_summary(stats: ErrorStats) -> Summary:
    return {
        "mean_abs_error_pct": stats.mean_abs_error_pct,
        "max_abs_error_pct": stats.max_abs_error_pct,
        "v_ref": stats.v_ref,
    }


def surface_summary(report: SurfaceErrorReport) -> Summary:
    return {
        "points": report.count,
        "mean_abs": report.mean_abs,
        "mse": report.mse,
        "mse_rm": report.mse_rm,
        "max_abs": report.max_abs,
        "pct_of_max_height": report.pct_of_max_height,
        "max_match_distance": report.max_match_distance,
    }


def histogram_csv(report: SurfaceErrorReport) -> str:
    counts, edges = report.histogram
    lines = ["bin_lo,bin_hi,count"]
    lines += [
        f"{lo:.17g},{hi:.17g},{int(c)}"
        for lo, hi, c in zip(edges[:-1], edges[1:], counts, strict=True)
    ]
    return "\n".join(lines) + "\n"


# -----------------------------------------------------------------------------
# Rich tables
# -----------------------------------------------------------------------------


def error_table(rows: Iterable[tuple[str, ErrorStats]], title: str = "") -> Table:
    table = Table(title=title or None)
    table.add_column("run")
    table.add_column("mean |error| %", justify="right")
    table.add_column("max |error| %", justify="right")
    for label, stats in rows:
        table.add_row(
            label, f"{stats.mean_abs_error_pct:.2f}", f"{stats.max_abs_error_pct:.2f}"
        )
    return table


def curve_table(points: Sequence[CurvePoint]) -> Table:
    table = Table(title="learning curve")
    for name in ("samples", "R²", "MSE", "epochs", "seconds"):
        table.add_column(name, justify="right")
    for p in points:
        table.add_row(
            str(p.size), f"{p.r2:.4f}", f"{p.mse:.4g}", str(p.epochs), f"{p.seconds:.1f}"
        )
    return table


def complexity_table(sizes: Iterable[int]) -> Table:
    """Control inputs needed for an N×N array: N² direct versus 2N passive."""
    table = Table(title="addressing inputs")
    for name in ("N", "direct (N²)", "passive (2N)"):
        table.add_column(name, justify="right")
    for n in sizes:
        cost = addressing_complexity(n)
        table.add_row(str(n), str(cost.direct), str(cost.passive))
    return table


def mapping_table(items: Mapping[str, object], title: str = "") -> Table:
    table = Table(title=title or None, show_header=False)
    table.add_column("key")
    table.add_column("value", justify="right")
    for k, v in items.items():
        table.add_row(k, _fmt(v))
    return table
