"""Unit tests for the static crossbar network model."""

from __future__ import annotations

import numpy as np
import pytest

from morphgrid.common import (
    CalibrationError,
    DimensionMismatch,
    NotRepresentable,
    NumericError,
    SingularSystem,
    UnreachablePixel,
)
from morphgrid.crossbar import (
    CrossbarConfig,
    DriveAssignment,
    VoltageGrid,
    addressing_complexity,
    attenuation_map,
    build_network,
    calibrate_electrodes,
    compensate,
    dpa_drive,
    dpa_representable,
    far_corner_attenuation,
    grid_from_rows,
    kcl_residual,
    pixel_voltages,
    probe_drive,
    solve_dc,
    voltage_error,
)


def _dense_oracle(cfg: CrossbarConfig, drive: DriveAssignment) -> np.ndarray:
    """Nodal solve assembled element by element with plain numpy."""
    net = build_network(cfg)
    n = net.n_nodes
    lap = np.zeros((n, n))

    def stamp(a: int, b: int, g: float) -> None:
        lap[a, a] += g
        lap[b, b] += g
        lap[a, b] -= g
        lap[b, a] -= g

    g_seg = 1.0 / cfg.r_segment
    for i in range(cfg.n_rows):
        for j in range(cfg.n_cols):
            stamp(net.row_node(i, j), net.mid_node(i, j), 2 * cfg.g_pixel)
            stamp(net.mid_node(i, j), net.col_node(i, j), 2 * cfg.g_pixel)
            if j + 1 < cfg.n_cols:
                stamp(net.row_node(i, j), net.row_node(i, j + 1), g_seg)
                stamp(net.mid_node(i, j), net.mid_node(i, j + 1), cfg.g_leak_effective)
            if i + 1 < cfg.n_rows:
                stamp(net.col_node(i, j), net.col_node(i + 1, j), g_seg)
                stamp(net.mid_node(i, j), net.mid_node(i + 1, j), cfg.g_leak_effective)
        stamp(net.row_contact(i), net.row_node(i, 0), g_seg)
    for j in range(cfg.n_cols):
        stamp(net.col_contact(j), net.col_node(0, j), g_seg)

    fixed = {}
    for i, v in enumerate(drive.rows):
        if v is not None:
            fixed[net.row_contact(i)] = v
    for j, v in enumerate(drive.cols):
        if v is not None:
            fixed[net.col_contact(j)] = v
    known = np.array(sorted(fixed))
    free = np.array([k for k in range(n) if k not in fixed])
    vk = np.array([fixed[k] for k in known])
    x = np.linalg.solve(lap[np.ix_(free, free)], -lap[np.ix_(free, known)] @ vk)
    out = np.empty(n)
    out[known] = vk
    out[free] = x
    return out


class TestCrossbarConfig:
    def test_default_values(self):
        cfg = CrossbarConfig()
        assert cfg.shape == (6, 6)
        assert cfg.r_segment == 8.0
        assert cfg.blocker_factor == 1.0

    def test_blockers_scale_leakage(self):
        cfg = CrossbarConfig(g_leak=1e-5, blocker_factor=0.2)
        assert cfg.g_leak_effective == pytest.approx(2e-6)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_rows": 0},
            {"r_segment": 0.0},
            {"g_pixel": -1.0},
            {"g_leak": -1e-6},
            {"blocker_factor": 0.0},
            {"blocker_factor": 1.5},
        ],
    )
    def test_rejects_invalid_parameters(self, kwargs):
        with pytest.raises(ValueError):
            CrossbarConfig(**kwargs)


class TestDriveAndGrid:
    def test_floating_assignment(self):
        drive = DriveAssignment.floating(2, 3)
        assert drive.shape == (2, 3)
        assert not drive.any_driven

    def test_values_use_nan_for_floating(self):
        drive = DriveAssignment.create([1, None], [None, 0])
        assert np.isnan(drive.row_values()[1])
        assert drive.col_values()[1] == 0.0
        assert drive.row_driven.tolist() == [True, False]

    def test_scaled_keeps_floating_contacts(self):
        drive = DriveAssignment.create([0.5, None], [-0.5]).scaled(2.0)
        assert drive.rows == (1.0, None)
        assert drive.cols == (-1.0,)

    def test_rejects_non_finite_drive(self):
        with pytest.raises(ValueError):
            DriveAssignment.create([np.inf], [0.0])

    def test_grid_is_read_only_copy(self):
        raw = np.zeros((2, 2))
        grid = VoltageGrid(raw)
        raw[0, 0] = 1.0
        assert grid.values[0, 0] == 0.0
        with pytest.raises(ValueError):
            grid.values[0, 0] = 2.0

    def test_grid_rejects_bad_input(self):
        with pytest.raises(DimensionMismatch):
            VoltageGrid(np.zeros(4))
        with pytest.raises(ValueError):
            VoltageGrid(np.array([[np.nan]]))

    def test_flatten_is_row_major(self):
        grid = grid_from_rows([[1, 2, 3], [4, 5, 6]])
        assert grid.flatten().tolist() == [1, 2, 3, 4, 5, 6]


class TestSolveDc:
    def test_single_pixel_divider(self):
        cfg = CrossbarConfig(n_rows=1, n_cols=1, r_segment=50.0, g_pixel=1e-2, g_leak=0.0)
        net = build_network(cfg)
        drive = DriveAssignment.create([1.0], [0.0])
        v = pixel_voltages(net, solve_dc(net, drive)).values[0, 0]
        assert v == pytest.approx(1.0 / (1.0 + 2 * 50.0 * 1e-2), rel=1e-12)

    def test_matches_dense_oracle(self, crossbar_3x3):
        net = build_network(crossbar_3x3)
        drive = DriveAssignment.create([0.7, None, -0.2], [None, 0.1, 0.0])
        pots = solve_dc(net, drive)
        expected = _dense_oracle(crossbar_3x3, drive)
        np.testing.assert_allclose(pots.potentials, expected, atol=1e-12)

    def test_kcl_holds_at_free_nodes(self, crossbar_3x3):
        net = build_network(crossbar_3x3)
        drive = DriveAssignment.create([1.0, None, None], [None, None, 0.0])
        pots = solve_dc(net, drive)
        assert kcl_residual(net, pots, drive) < 1e-9

    def test_large_array_uses_iterative_solver(self):
        cfg = CrossbarConfig(n_rows=20, n_cols=20)
        net = build_network(cfg)
        drive = probe_drive(cfg, 19, 19, 1.0)
        pots = solve_dc(net, drive)
        assert kcl_residual(net, pots, drive) < 1e-8
        v = pixel_voltages(net, pots).values
        assert 0 < v[19, 19] < 1

    def test_sneak_path_through_floating_lines(self):
        cfg = CrossbarConfig(n_rows=2, n_cols=2, r_segment=1e-6, g_pixel=1.0, g_leak=0.0)
        net = build_network(cfg)
        drive = probe_drive(cfg, 0, 0, 1.0)
        v = pixel_voltages(net, solve_dc(net, drive)).values
        third = 1.0 / 3.0
        np.testing.assert_allclose(v, [[1.0, third], [third, -third]], atol=1e-4)

    def test_floating_column_carries_no_current(self):
        cfg = CrossbarConfig(n_rows=1, n_cols=2, g_leak=0.0)
        net = build_network(cfg)
        drive = DriveAssignment.create([1.0], [0.0, None])
        v = pixel_voltages(net, solve_dc(net, drive)).values
        assert v[0, 1] == pytest.approx(0.0, abs=1e-12)

    def test_nothing_driven_is_singular(self, crossbar_3x3):
        net = build_network(crossbar_3x3)
        with pytest.raises(SingularSystem):
            solve_dc(net, DriveAssignment.floating(3, 3))

    def test_drive_shape_must_match(self, crossbar_3x3):
        net = build_network(crossbar_3x3)
        with pytest.raises(DimensionMismatch):
            solve_dc(net, DriveAssignment.create([1.0, 0.0], [0.0, 0.0]))

    def test_solution_is_linear_in_drive(self, crossbar_3x3):
        net = build_network(crossbar_3x3)
        drive = DriveAssignment.create([0.4, None, -0.3], [0.0, None, 0.2])
        a = solve_dc(net, drive).potentials
        b = solve_dc(net, drive.scaled(-2.5)).potentials
        np.testing.assert_allclose(b, -2.5 * a, atol=1e-12)


class TestDirectPassiveAddressing:
    def test_representable_patterns(self):
        assert dpa_representable(grid_from_rows([[1, 0], [0, -1]]))
        assert dpa_representable(grid_from_rows([[0.3, 0.3], [0.3, 0.3]]))

    def test_unrepresentable_patterns(self, mixed_grid):
        assert not dpa_representable(mixed_grid)
        assert not dpa_representable(grid_from_rows(np.eye(3)))

    def test_checkerboard_drive_is_centred(self):
        drive = dpa_drive(grid_from_rows([[1, 0], [0, -1]]))
        assert drive.rows == pytest.approx((0.5, -0.5))
        assert drive.cols == pytest.approx((-0.5, 0.5))

    def test_inactive_lines_float(self):
        target = np.zeros((3, 3))
        target[1, 2] = 1.0
        drive = dpa_drive(VoltageGrid(target))
        assert drive.rows == (None, 0.5, None)
        assert drive.cols == (None, None, -0.5)

    def test_only_active_block_must_be_representable(self):
        target = grid_from_rows([[1, 1, 0], [1, 1, 0], [0, 0, 0]])
        drive = dpa_drive(target)
        assert drive.rows[2] is None
        assert drive.cols[2] is None

    def test_zero_target_grounds_everything(self):
        drive = dpa_drive(VoltageGrid.zeros(2, 3))
        assert drive.rows == (0.0, 0.0)
        assert drive.cols == (0.0, 0.0, 0.0)

    def test_unrepresentable_raises(self, mixed_grid):
        with pytest.raises(NotRepresentable):
            dpa_drive(mixed_grid)

    def test_ideal_electrodes_reproduce_full_drive(self, ideal_crossbar):
        rows = np.linspace(-0.5, 0.5, 6)
        cols = np.linspace(0.4, -0.4, 6)
        target = VoltageGrid(rows[:, None] - cols[None, :])
        net = build_network(ideal_crossbar)
        v = pixel_voltages(net, solve_dc(net, dpa_drive(target)))
        np.testing.assert_allclose(v.values, target.values, atol=1e-2)


class TestAttenuation:
    def test_map_is_symmetric_on_square_array(self):
        net = build_network(CrossbarConfig(n_rows=4, n_cols=4))
        att = attenuation_map(net)
        np.testing.assert_allclose(att, att.T, rtol=1e-10)

    def test_far_corner_is_weakest(self):
        net = build_network(CrossbarConfig(n_rows=4, n_cols=4))
        att = attenuation_map(net)
        assert att.max() <= 1.0
        assert att[-1, -1] == pytest.approx(att.min())
        assert att[0, 0] == pytest.approx(att.max())

    def test_probe_sign_does_not_matter(self, crossbar_3x3):
        net = build_network(crossbar_3x3)
        np.testing.assert_allclose(
            attenuation_map(net, 1.0), attenuation_map(net, -2.0), rtol=1e-10
        )

    def test_zero_probe_rejected(self, crossbar_3x3):
        with pytest.raises(ValueError):
            attenuation_map(build_network(crossbar_3x3), 0.0)

    def test_calibration_hits_target(self):
        cfg = calibrate_electrodes(CrossbarConfig(), 0.796)
        assert far_corner_attenuation(cfg) == pytest.approx(0.796, abs=1e-5)

    def test_longer_electrodes_attenuate_more(self):
        a = far_corner_attenuation(CrossbarConfig(r_segment=4.0))
        b = far_corner_attenuation(CrossbarConfig(r_segment=16.0))
        assert b < a

    @pytest.mark.parametrize("value", [0.0, 1.0, 1.2])
    def test_calibration_rejects_out_of_range(self, value):
        with pytest.raises(CalibrationError):
            calibrate_electrodes(CrossbarConfig(n_rows=2, n_cols=2), value)


class TestCompensation:
    def test_divides_by_attenuation(self):
        target = grid_from_rows([[1.0, -0.5]])
        out = compensate(target, np.array([[0.5, 0.8]]))
        np.testing.assert_allclose(out.values, [[2.0, -0.625]])

    def test_zero_attenuation(self):
        with pytest.raises(UnreachablePixel, match="zero entry") as excinfo:
            compensate(grid_from_rows([[1.0]]), np.array([[0.0]]))
        # numeric failure, mapped to exit code 3 by the CLI
        assert isinstance(excinfo.value, NumericError)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            compensate(grid_from_rows([[1.0, 1.0]]), np.ones((2, 1)))


class TestVoltageError:
    def test_percentages_of_peak_target(self):
        target = grid_from_rows([[1.0, 0.0], [0.0, -1.0]])
        measured = grid_from_rows([[1.1, 0.0], [0.0, -1.0]])
        stats = voltage_error(measured, target)
        assert stats.v_ref == 1.0
        assert stats.mean_abs_error_pct == pytest.approx(2.5)
        assert stats.max_abs_error_pct == pytest.approx(10.0)
        assert stats.per_pixel_error[0, 0] == pytest.approx(0.1)

    def test_zero_target_uses_one_volt(self):
        stats = voltage_error(grid_from_rows([[0.02]]), VoltageGrid.zeros(1, 1))
        assert stats.v_ref == 1.0
        assert stats.max_abs_error_pct == pytest.approx(2.0)

    def test_explicit_reference(self):
        stats = voltage_error(grid_from_rows([[0.5]]), grid_from_rows([[0.0]]), v_ref=5.0)
        assert stats.mean_abs_error_pct == pytest.approx(10.0)

    def test_rejects_bad_reference_and_shapes(self):
        with pytest.raises(ValueError):
            voltage_error(grid_from_rows([[0.0]]), grid_from_rows([[0.0]]), v_ref=0.0)
        with pytest.raises(DimensionMismatch):
            voltage_error(VoltageGrid.zeros(1, 2), VoltageGrid.zeros(2, 1))


class TestAddressingComplexity:
    @pytest.mark.parametrize(("n", "direct", "passive"), [(1, 1, 2), (6, 36, 12), (100, 10000, 200)])
    def test_counts(self, n, direct, passive):
        cost = addressing_complexity(n)
        assert (cost.direct, cost.passive) == (direct, passive)

    def test_rejects_empty_array(self):
        with pytest.raises(ValueError):
            addressing_complexity(0)
