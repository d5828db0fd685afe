"""Demo target grids shipped with the package."""

from __future__ import annotations

from importlib import resources

from .common import ConfigError
from .crossbar import VoltageGrid
from .formats import read_grid

DEMOS = {
    "1": "demo_1.csv",
    "2": "demo_2.csv",
    "3": "demo_3.csv",
    "4": "demo_4.csv",
}
ALIASES = {"i": "1", "ii": "2", "iii": "3", "iv": "4"}


def demo_names() -> list[str]:
    return sorted(DEMOS)


def load_demo(name: str) -> VoltageGrid:
    """Load demo ``1``…``4`` (roman numerals accepted)."""
    key = ALIASES.get(name.lower(), name)
    if key not in DEMOS:
        msg = f"unknown demo {name!r} (choose from {', '.join(demo_names())})"
        raise ConfigError(msg)
    source = resources.files("morphgrid") / "data" / DEMOS[key]
    with resources.as_file(source) as path:
        return read_grid(path)
