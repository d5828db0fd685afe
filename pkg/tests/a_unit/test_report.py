"""Unit tests for heatmap rendering and text summaries."""

from __future__ import annotations

import numpy as np
import pytest
from rich.console import Console

from morphgrid.crossbar import ErrorStats, grid_from_rows
from morphgrid.pointcloud import surface_error
from morphgrid.report import (
    complexity_table,
    error_table,
    format_summary,
    grid_summary,
    grid_to_pgm,
    grid_to_ppm,
    histogram_csv,
    mapping_table,
    surface_summary,
)


def _render(table) -> str:
    console = Console(record=True, width=100)
    console.print(table)
    return console.export_text()


class TestGridToPgm:
    def test_hand_computed_levels(self):
        text = grid_to_pgm(np.array([[0.0, 0.25], [0.5, 1.0]]))
        assert text == "P2\n2 2\n255\n0 64 128 255\n"

    def test_constant_grid_is_black(self):
        text = grid_to_pgm(np.full((2, 3), 0.7))
        assert text.splitlines()[-1] == "0 0 0 0 0 0"

    def test_explicit_range_clips(self):
        text = grid_to_pgm(np.array([[-1.0, 2.0]]), vmin=0.0, vmax=1.0)
        assert text.splitlines()[-1] == "0 255"

    def test_cell_upscales(self):
        text = grid_to_pgm(np.array([[0.0, 1.0]]), cell=2)
        lines = text.splitlines()
        assert lines[1] == "4 2"
        assert lines[3] == "0 0 255 255 0 0 255 255"

    def test_comment_and_line_wrapping(self):
        text = grid_to_pgm(np.arange(16.0).reshape(4, 4), comment="demo")
        lines = text.splitlines()
        assert lines[1] == "# demo"
        assert len(lines[4].split()) == 12
        assert len(lines[5].split()) == 4

    def test_rejects_bad_cell(self):
        with pytest.raises(ValueError):
            grid_to_pgm(np.zeros((1, 1)), cell=0)

    def test_deterministic(self):
        values = np.random.default_rng(3).uniform(-1, 1, (6, 6))
        assert grid_to_pgm(values, cell=3) == grid_to_pgm(values.copy(), cell=3)


class TestGridToPpm:
    def test_diverging_colours(self):
        text = grid_to_ppm(np.array([[-1.0, 0.0, 1.0]]))
        assert text == "P3\n3 1\n255\n0 0 255 255 255 255 255 0 0\n"

    def test_half_scale(self):
        text = grid_to_ppm(np.array([[0.5]]), vmax=1.0)
        assert text.splitlines()[-1] == "255 128 128"

    def test_zero_grid_is_white(self):
        text = grid_to_ppm(np.zeros((1, 2)))
        assert text.splitlines()[-1] == "255 255 255 255 255 255"


class TestSummaries:
    def test_format_summary(self):
        text = format_summary({"name": "demo", "error": 1.0 / 3.0, "count": 4})
        assert text == "name: demo\nerror: 0.333333\ncount: 4\n"

    def test_grid_summary_prefix(self):
        items = grid_summary(grid_from_rows([[1.0, -1.0]]), prefix="target_")
        assert items["target_shape"] == "1x2"
        assert items["target_min"] == -1.0
        assert items["target_mean"] == 0.0

    def test_surface_summary_and_histogram(self):
        a = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
        b = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        report = surface_error(a, b, bins=2)
        items = surface_summary(report)
        assert items["points"] == 2
        assert items["mean_abs"] == pytest.approx(0.5)
        lines = histogram_csv(report).splitlines()
        assert lines[0] == "bin_lo,bin_hi,count"
        assert len(lines) == 3
        assert sum(int(line.split(",")[2]) for line in lines[1:]) == 2


class TestTables:
    def test_complexity_table(self):
        table = complexity_table([6, 100])
        assert table.row_count == 2
        text = _render(table)
        assert "10000" in text
        assert "200" in text

    def test_error_table(self):
        stats = ErrorStats(1.234, 5.678, np.zeros((1, 1)), 1.0)
        text = _render(error_table([("PS", stats)], title="demo 1"))
        assert "1.23" in text
        assert "5.68" in text
        assert "demo 1" in text

    def test_mapping_table(self):
        text = _render(mapping_table({"r_segment": 8.5}))
        assert "r_segment" in text
        assert "8.5" in text
