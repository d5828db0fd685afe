"""Configuration management for morphgrid experiments."""

from __future__ import annotations

import tomllib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .common import ConfigError
from .crossbar import CrossbarConfig, calibrate_electrodes
from .mechanics import PlateConfig, StripConfig
from .mlp import FORWARD_HIDDEN, INVERSE_HIDDEN, MlpSpec
from .scanner import DEFAULT_TAU_CHARGE, DEFAULT_TAU_FLOAT, PixelDynamicsConfig

DEFAULT_CONFIG_TOML = """\
# morphgrid configuration
# Every key is optional; missing keys take the defaults shown here.

[crossbar]
n_rows = 6
n_cols = 6
r_segment = 8.0                   # ohm per electrode segment
g_pixel = 1e-3                    # S, through-thickness pixel conductance
g_leak = 1e-4                     # S, lateral leakage between neighbours
far_corner = 0.796                # far-pixel attenuation r_segment is fitted to, 0 keeps r_segment

[dynamics]
tau_charge = 1.5647               # s, charging time constant
tau_float = 4409.4                # s, floating self-discharge
tau_ground = 1.5647               # s, grounded discharge
residual_fraction = 0.0           # fraction of peak kept after grounding

[scan]
dwell = 3.0                       # s per row
dt = 0.1                          # s, sampling step (must divide dwell)
cycles = 1
v_supply = 5.0                    # V
compensate = true                 # pre-scale progressive-scan inputs
blockers_on = 0.2                 # leakage multiplier with polymer blockers
blockers_off = 1.0                # leakage multiplier without blockers

[strip]
length = 20.0                     # mm
beta = 0.0016                     # strain per volt
h_sub = 0.090                     # mm
h_ppy = 0.012                     # mm
modulus_ratio = 1.0               # E_active / E_substrate

[plate]
# curvature per volt comes from the [strip] bilayer
side = 54.0                       # mm
pixels_per_side = 6
pixel_pitch = 9.0                 # mm
pixel_active = 7.5                # mm
grid_n = 61                       # finite-difference nodes per side (odd)
nu = 0.34
thickness = 0.102                 # mm

[dataset]
seed = 0
n_train = 5000
n_test = 100
mode = "z"                        # z, total
nodes = 20                        # sampled nodes per side
adjacency_cap = 1.0               # V, 0 disables the neighbour constraint
workers = 4

[mlp]
forward_hidden = [73, 300, 580, 880, 1200]
inverse_hidden = [901, 700, 550, 300, 180]
seed = 0
learning_rate = 1e-3
beta1 = 0.9
beta2 = 0.999
weight_decay = 1e-4
batch_size = 32
max_epochs = 200
patience = 20
validation_fraction = 0.1

[paths]
out = "out"
"""


@dataclass
class CrossbarSection:
    """Crossbar electrical parameters."""

    n_rows: int = 6
    n_cols: int = 6
    r_segment: float = 8.0
    g_pixel: float = 1e-3
    g_leak: float = 1e-4
    far_corner: float = 0.796

    def to_config(self, blocker_factor: float = 1.0) -> CrossbarConfig:
        return CrossbarConfig(
            n_rows=self.n_rows,
            n_cols=self.n_cols,
            r_segment=self.r_segment,
            g_pixel=self.g_pixel,
            g_leak=self.g_leak,
            blocker_factor=blocker_factor,
        )

    def electrodes(
        self, blocker_factor: float = 1.0, *, fit_factor: float | None = None
    ) -> CrossbarConfig:
        """Array config with ``r_segment`` fitted to ``far_corner`` (0 keeps it as set).

        The fit uses ``fit_factor`` (default ``blocker_factor``) so that both
        blocker settings can share electrodes fitted on one of them.
        """
        cfg = self.to_config(blocker_factor)
        if not self.far_corner:
            return cfg
        fit = blocker_factor if fit_factor is None else fit_factor
        fitted = calibrate_electrodes(self.to_config(fit), self.far_corner)
        return replace(cfg, r_segment=fitted.r_segment)


@dataclass
class DynamicsSection:
    """Pixel charge dynamics."""

    tau_charge: float = DEFAULT_TAU_CHARGE
    tau_float: float = DEFAULT_TAU_FLOAT
    tau_ground: float = DEFAULT_TAU_CHARGE
    residual_fraction: float = 0.0

    def to_config(self) -> PixelDynamicsConfig:
        return PixelDynamicsConfig(
            self.tau_charge, self.tau_float, self.tau_ground, self.residual_fraction
        )


@dataclass
class ScanSection:
    """Addressing experiment settings."""

    dwell: float = 3.0
    dt: float = 0.1
    cycles: int = 1
    v_supply: float = 5.0
    compensate: bool = True
    blockers_on: float = 0.2
    blockers_off: float = 1.0


@dataclass
class StripSection:
    length: float = 20.0
    beta: float = 0.0016
    h_sub: float = 0.090
    h_ppy: float = 0.012
    modulus_ratio: float = 1.0

    def to_config(self) -> StripConfig:
        return StripConfig(**_values(self))


@dataclass
class PlateSection:
    side: float = 54.0
    pixels_per_side: int = 6
    pixel_pitch: float = 9.0
    pixel_active: float = 7.5
    grid_n: int = 61
    nu: float = 0.34
    thickness: float = 0.102

    def to_config(self, strip: StripConfig) -> PlateConfig:
        return PlateConfig(**_values(self), strip=strip)


@dataclass
class DatasetSection:
    """Training data generation."""

    seed: int = 0
    n_train: int = 5000
    n_test: int = 100
    mode: str = "z"
    nodes: int = 20
    adjacency_cap: float = 1.0
    workers: int = 4

    @property
    def cap(self) -> float | None:
        return self.adjacency_cap or None


@dataclass
class MlpSection:
    """Network sizes and optimizer settings."""

    forward_hidden: list[int] = field(default_factory=lambda: list(FORWARD_HIDDEN))
    inverse_hidden: list[int] = field(default_factory=lambda: list(INVERSE_HIDDEN))
    seed: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 1e-4
    batch_size: int = 32
    max_epochs: int = 200
    patience: int = 20
    validation_fraction: float = 0.1

    def to_spec(self, input_dim: int, output_dim: int, *, inverse: bool = False) -> MlpSpec:
        hidden = self.inverse_hidden if inverse else self.forward_hidden
        return MlpSpec(
            input_dim,
            tuple(hidden),
            output_dim,
            seed=self.seed,
            learning_rate=self.learning_rate,
            beta1=self.beta1,
            beta2=self.beta2,
            weight_decay=self.weight_decay,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            patience=self.patience,
            validation_fraction=self.validation_fraction,
        )


@dataclass
class PathsSection:
    out: str = "out"


def _values(section: object) -> dict[str, Any]:
    return {f.name: getattr(section, f.name) for f in fields(section)}  # type: ignore[arg-type]


def _check_type(section: str, key: str, value: Any, default: Any) -> Any:
    where = f"[{section}] {key}"
    if isinstance(default, bool):
        if not isinstance(value, bool):
            msg = f"{where}: expected true/false, got {value!r}"
            raise ConfigError(msg)
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            msg = f"{where}: expected an integer, got {value!r}"
            raise ConfigError(msg)
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, int | float):
            msg = f"{where}: expected a number, got {value!r}"
            raise ConfigError(msg)
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            msg = f"{where}: expected a string, got {value!r}"
            raise ConfigError(msg)
        return value
    if isinstance(default, list):
        if not isinstance(value, list) or not all(
            isinstance(v, int) and not isinstance(v, bool) for v in value
        ):
            msg = f"{where}: expected a list of integers, got {value!r}"
            raise ConfigError(msg)
        return list(value)
    return value


@dataclass
class ExperimentConfig:
    """morphgrid configuration."""

    crossbar: CrossbarSection = field(default_factory=CrossbarSection)
    dynamics: DynamicsSection = field(default_factory=DynamicsSection)
    scan: ScanSection = field(default_factory=ScanSection)
    strip: StripSection = field(default_factory=StripSection)
    plate: PlateSection = field(default_factory=PlateSection)
    dataset: DatasetSection = field(default_factory=DatasetSection)
    mlp: MlpSection = field(default_factory=MlpSection)
    paths: PathsSection = field(default_factory=PathsSection)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ExperimentConfig:
        """Create config from dictionary."""
        config = cls()
        config.update_from_dict(data)
        return config

    def update_from_dict(self, data: dict[str, Any]) -> None:
        """Update config from dictionary (partial update).

        Raises:
            ConfigError: On unknown sections or keys and on wrongly typed values.

        """
        for name, values in data.items():
            section = getattr(self, name, None) if name in _SECTIONS else None
            if section is None:
                msg = f"unknown section [{name}]"
                raise ConfigError(msg)
            if not isinstance(values, dict):
                msg = f"[{name}] must be a table"
                raise ConfigError(msg)
            defaults = _values(type(section)())
            for key, value in values.items():
                if key not in defaults:
                    msg = f"unknown key {key!r} in [{name}]"
                    raise ConfigError(msg)
                setattr(section, key, _check_type(name, key, value, defaults[key]))

    def plate_config(self) -> PlateConfig:
        """Plate loaded by the [strip] bilayer's curvature per volt."""
        return self.plate.to_config(self.strip.to_config())

    def validate(self) -> None:
        """Check every section against its module's invariants."""
        try:
            self.crossbar.to_config(self.scan.blockers_on)
            self.crossbar.to_config(self.scan.blockers_off)
            self.dynamics.to_config()
            self.plate_config()
            self.mlp.to_spec(1, 1)
            self.mlp.to_spec(1, 1, inverse=True)
        except ValueError as e:
            raise ConfigError(str(e)) from e
        if self.dataset.mode not in {"z", "total"}:
            msg = f"[dataset] mode must be 'z' or 'total', got {self.dataset.mode!r}"
            raise ConfigError(msg)
        if self.dataset.adjacency_cap < 0:
            msg = "[dataset] adjacency_cap must be non-negative"
            raise ConfigError(msg)
        if self.dataset.nodes < 2 or self.dataset.nodes > self.plate.grid_n:
            msg = "[dataset] nodes must be between 2 and [plate] grid_n"
            raise ConfigError(msg)
        if self.scan.cycles < 1 or self.scan.dwell <= 0 or self.scan.dt <= 0:
            msg = "[scan] cycles, dwell and dt must be positive"
            raise ConfigError(msg)
        if not 0 <= self.crossbar.far_corner < 1:
            msg = "[crossbar] far_corner must be in (0, 1), or 0 to keep r_segment"
            raise ConfigError(msg)


_SECTIONS = {f.name for f in fields(ExperimentConfig)}


def load_config(config_path: Path | None = None) -> ExperimentConfig:
    """Load configuration from file.

    Args:
        config_path: Optional config path. Defaults apply if None.

    Returns:
        Validated configuration with defaults for missing values.

    Raises:
        ConfigError: If the file is missing, unreadable or invalid.

    """
    config = ExperimentConfig()
    if config_path is not None:
        if not config_path.exists():
            msg = f"config file not found: {config_path}"
            raise ConfigError(msg)
        try:
            with config_path.open("rb") as f:
                data = tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            msg = f"{config_path}: {e}"
            raise ConfigError(msg) from e
        config.update_from_dict(data)
    config.validate()
    return config
