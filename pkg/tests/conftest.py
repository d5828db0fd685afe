"""Shared pytest fixtures and configuration for morphgrid tests.

Test Pyramid Structure:
- tests/a_unit/       - Unit tests (fast, isolated, no I/O)
- tests/b_integration/ - Integration tests (module composition, file I/O)
- tests/c_e2e/        - End-to-end tests (CLI workflows)

Run specific test types:
    uv run pytest -m unit              # Run only unit tests
    uv run pytest -m integration       # Run only integration tests
    uv run pytest -m e2e               # Run only e2e tests
    uv run pytest -m "not slow"        # Skip the long acceptance runs
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from morphgrid.crossbar import CrossbarConfig, VoltageGrid
from morphgrid.mechanics import PlateConfig
from morphgrid.scanner import PixelDynamicsConfig


def pytest_collection_modifyitems(config, items):
    """Automatically apply markers based on test directory."""
    assert config
    for item in items:
        # Get the path relative to tests/
        test_path = Path(item.fspath)
        parts = test_path.parts

        # Apply markers based on directory
        if "a_unit" in parts:
            item.add_marker(pytest.mark.unit)
        elif "b_integration" in parts:
            item.add_marker(pytest.mark.integration)
        elif "c_e2e" in parts:
            item.add_marker(pytest.mark.e2e)


# -----------------------------------------------------------------------------
# Shared Fixtures
# -----------------------------------------------------------------------------


@pytest.fixture
def crossbar_3x3() -> CrossbarConfig:
    """Small array with resistive electrodes and leakage."""
    return CrossbarConfig(n_rows=3, n_cols=3, r_segment=20.0, g_pixel=1e-3, g_leak=1e-5)


@pytest.fixture
def ideal_crossbar() -> CrossbarConfig:
    """6×6 array with near-ideal electrodes (pixel/segment conductance ratio 1e4)."""
    return CrossbarConfig(r_segment=1e-4, g_pixel=1.0, g_leak=0.0)


@pytest.fixture
def slow_dynamics() -> PixelDynamicsConfig:
    """Perfect retention while floating."""
    return PixelDynamicsConfig(tau_float=1e12)


@pytest.fixture
def small_plate() -> PlateConfig:
    """Coarse plate for fast solver tests."""
    return PlateConfig(grid_n=31)


@pytest.fixture
def seamless_plate() -> PlateConfig:
    """Plate whose pixels cover it completely (no gaps)."""
    return PlateConfig(pixel_active=9.0, grid_n=31)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def mixed_grid() -> VoltageGrid:
    """2×2 target with both polarities."""
    return VoltageGrid(np.array([[0.8, -0.5], [0.0, 0.3]]))
