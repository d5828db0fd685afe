"""Unit tests for config dataclasses (pure logic, no I/O)."""

from __future__ import annotations

import tomllib

import pytest

from morphgrid.common import ConfigError
from morphgrid.config import (
    DEFAULT_CONFIG_TOML,
    CrossbarSection,
    DatasetSection,
    DynamicsSection,
    ExperimentConfig,
    MlpSection,
    PlateSection,
    ScanSection,
)
from morphgrid.mechanics import StripConfig, strip_curvature
from morphgrid.mlp import FORWARD_HIDDEN, INVERSE_HIDDEN


class TestCrossbarSection:
    def test_default_values(self):
        section = CrossbarSection()
        assert section.r_segment == 8.0
        assert section.far_corner == 0.796

    def test_to_config_applies_blockers(self):
        cfg = CrossbarSection(g_leak=1e-5).to_config(0.2)
        assert cfg.blocker_factor == 0.2
        assert cfg.g_leak_effective == pytest.approx(2e-6)


class TestDynamicsSection:
    def test_to_config(self):
        dyn = DynamicsSection(tau_charge=2.0, residual_fraction=0.1).to_config()
        assert dyn.tau_charge == 2.0
        assert dyn.residual_fraction == 0.1


class TestScanSection:
    def test_default_values(self):
        scan = ScanSection()
        assert scan.dwell == 3.0
        assert scan.dt == 0.1
        assert scan.compensate is True
        assert scan.blockers_on == 0.2
        assert scan.blockers_off == 1.0


class TestDatasetSection:
    def test_zero_cap_disables_constraint(self):
        assert DatasetSection(adjacency_cap=0.0).cap is None
        assert DatasetSection(adjacency_cap=0.4).cap == 0.4


class TestMlpSection:
    def test_forward_and_inverse_specs(self):
        section = MlpSection(max_epochs=7)
        fwd = section.to_spec(36, 400)
        inv = section.to_spec(400, 36, inverse=True)
        assert fwd.hidden_dims == FORWARD_HIDDEN
        assert inv.hidden_dims == INVERSE_HIDDEN
        assert fwd.max_epochs == inv.max_epochs == 7


class TestPlateSection:
    def test_to_config(self):
        plate = PlateSection(grid_n=31).to_config(StripConfig())
        assert plate.grid_n == 31
        assert plate.side == 54.0

    def test_curvature_follows_strip_section(self):
        config = ExperimentConfig()
        base = config.plate_config().kappa_per_volt
        assert base == pytest.approx(strip_curvature(1.0, config.strip.to_config()))
        config.strip.beta *= 2
        assert config.plate_config().kappa_per_volt == pytest.approx(2 * base)


class TestExperimentConfig:
    def test_default_values(self):
        config = ExperimentConfig()
        assert config.crossbar.n_rows == 6
        assert config.dataset.n_train == 5000
        assert config.paths.out == "out"

    def test_from_dict_partial(self):
        config = ExperimentConfig.from_dict(
            {"scan": {"dwell": 2.0, "cycles": 3}, "dataset": {"mode": "total"}}
        )
        assert config.scan.dwell == 2.0
        assert config.scan.cycles == 3
        assert config.scan.dt == 0.1
        assert config.dataset.mode == "total"

    def test_int_accepted_for_float(self):
        config = ExperimentConfig.from_dict({"crossbar": {"r_segment": 10}})
        assert config.crossbar.r_segment == 10.0
        assert isinstance(config.crossbar.r_segment, float)

    @pytest.mark.parametrize(
        "data",
        [
            {"nope": {}},
            {"scan": {"speed": 1}},
            {"scan": 3},
            {"scan": {"cycles": 1.5}},
            {"scan": {"cycles": True}},
            {"scan": {"compensate": "yes"}},
            {"dataset": {"mode": 1}},
            {"mlp": {"forward_hidden": [10, "x"]}},
            {"crossbar": {"g_leak": "small"}},
            {"plate": {"kappa_per_volt": 0.01}},
        ],
    )
    def test_rejects_bad_input(self, data):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(data)

    def test_validate_accepts_defaults(self):
        ExperimentConfig().validate()

    @pytest.mark.parametrize(
        "data",
        [
            {"crossbar": {"r_segment": -1.0}},
            {"crossbar": {"far_corner": 1.0}},
            {"scan": {"blockers_on": 0.0}},
            {"dynamics": {"tau_float": 0.0}},
            {"plate": {"grid_n": 60}},
            {"strip": {"beta": 0.0}},
            {"dataset": {"mode": "xyz"}},
            {"dataset": {"adjacency_cap": -0.5}},
            {"dataset": {"nodes": 100}},
            {"scan": {"cycles": 0}},
            {"mlp": {"forward_hidden": []}},
        ],
    )
    def test_validate_rejects(self, data):
        config = ExperimentConfig.from_dict(data)
        with pytest.raises(ConfigError):
            config.validate()


class TestDefaultToml:
    def test_parses_to_defaults(self):
        config = ExperimentConfig.from_dict(tomllib.loads(DEFAULT_CONFIG_TOML))
        default = ExperimentConfig()
        assert config.crossbar == default.crossbar
        assert config.scan == default.scan
        assert config.plate == default.plate
        assert config.dataset == default.dataset
        assert config.mlp == default.mlp
        assert config.dynamics.tau_charge == pytest.approx(default.dynamics.tau_charge, rel=1e-4)
        assert config.dynamics.tau_float == pytest.approx(default.dynamics.tau_float, rel=1e-4)

    def test_documents_every_key(self):
        data = tomllib.loads(DEFAULT_CONFIG_TOML)
        config = ExperimentConfig()
        for name, values in data.items():
            section = getattr(config, name)
            assert set(values) == set(vars(section))
