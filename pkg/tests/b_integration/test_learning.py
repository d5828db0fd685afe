"""Long-running checks of the surrogate networks on full-size datasets.

Skip with ``-m "not slow"``.
"""

from __future__ import annotations

import numpy as np
import pytest

from morphgrid import dataset as ds
from morphgrid.config import ExperimentConfig
from morphgrid.control import invert_surface
from morphgrid.crossbar import VoltageGrid
from morphgrid.mechanics import Heightfield
from morphgrid.mlp import init, learning_curve, time_predict, train

pytestmark = pytest.mark.slow

CURVE_SIZES = (100, 500, 1000, 2000, 5000)


@pytest.fixture(scope="module")
def config() -> ExperimentConfig:
    return ExperimentConfig()


@pytest.fixture(scope="module")
def datasets(config):
    section = config.dataset
    plate = config.plate_config()
    train_set = ds.generate(
        section.n_train, section.seed, plate, grid_n=section.nodes,
        adjacency_cap=section.cap, workers=section.workers,
    )
    test_set = ds.generate(
        section.n_test, section.seed + 1, plate, grid_n=section.nodes,
        adjacency_cap=section.cap, workers=section.workers,
    )
    return train_set, test_set


class TestForwardLearningCurve:
    def test_accuracy_grows_with_data(self, config, datasets):
        train_set, test_set = datasets
        spec = config.mlp.to_spec(36, config.dataset.nodes**2)
        points = learning_curve(
            (train_set.voltages, train_set.displacements),
            (test_set.voltages, test_set.displacements),
            CURVE_SIZES,
            spec,
        )
        r2 = [p.r2 for p in points]
        assert all(b >= a - 0.02 for a, b in zip(r2, r2[1:], strict=False))
        assert r2[-1] >= 0.85
        assert r2[0] <= r2[-1] - 0.15


class TestInverseClosedLoop:
    @pytest.fixture(scope="class")
    def inverse_model(self, config, datasets):
        train_set, _ = datasets
        spec = config.mlp.to_spec(config.dataset.nodes**2, 36, inverse=True)
        model, _ = train(init(spec), train_set.displacements, train_set.voltages)
        return model

    def test_reaches_held_out_targets(self, config, datasets, inverse_model):
        _, test_set = datasets
        plate = config.plate_config()
        nodes = config.dataset.nodes
        axis = np.linspace(0.0, plate.side, nodes)
        r2s = []
        for sample in list(test_set)[:20]:
            target = Heightfield(axis, axis, sample.displacement.reshape(nodes, nodes))
            result = invert_surface(inverse_model, target, plate)
            r2s.append(result.r2)
            height_range = float(np.ptp(target.z))
            assert result.error.mean_abs < 0.15 * height_range
        assert float(np.mean(r2s)) > 0.7


class TestLatency:
    def test_single_prediction_is_fast(self, config):
        model = init(config.mlp.to_spec(36, config.dataset.nodes**2))
        grid = VoltageGrid(np.full((6, 6), 0.5))
        assert time_predict(model, grid.flatten()) < 0.02
