"""Report output: heatmap images and text summaries."""

from __future__ import annotations

from .images import grid_to_pgm, grid_to_ppm, write_pgm, write_ppm
from .summary import (
    complexity_table,
    curve_table,
    error_summary,
    error_table,
    format_summary,
    grid_summary,
    histogram_csv,
    mapping_table,
    surface_summary,
    write_summary,
)

__all__ = [
    "complexity_table",
    "curve_table",
    "error_summary",
    "error_table",
    "format_summary",
    "grid_summary",
    "grid_to_pgm",
    "grid_to_ppm",
    "histogram_csv",
    "mapping_table",
    "surface_summary",
    "write_pgm",
    "write_ppm",
    "write_summary",
]
