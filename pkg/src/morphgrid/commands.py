"""Command runners for the CLI.

Each ``run_*`` function performs one command and returns an exit code; library
exceptions are translated here and nowhere else.
"""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
from rich.console import Console

from . import _print_error, _warn
from .common import (
    EXIT_CONFIG,
    EXIT_NUMERIC,
    EXIT_SUCCESS,
    MorphgridError,
    NotRepresentable,
    NumericError,
)

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from .config import ExperimentConfig
    from .crossbar import VoltageGrid

console = Console()

PROTOCOLS = ("PS", "DPA")
DEFAULT_SIZES = (6, 10, 20, 50, 100)


def _guarded(action: Callable[[], None]) -> int:
    """Run ``action`` and map failures to exit codes."""
    try:
        action()
    except NumericError as e:
        _print_error(str(e))
        return EXIT_NUMERIC
    except (MorphgridError, ValueError, OSError) as e:
        _print_error(str(e))
        return EXIT_CONFIG
    return EXIT_SUCCESS


def load_target(spec: str) -> VoltageGrid:
    """A grid file, or ``demo:N`` for a shipped demo target."""
    from .demos import load_demo  # noqa: PLC0415
    from .formats import read_grid  # noqa: PLC0415

    if spec.startswith("demo:"):
        return load_demo(spec.removeprefix("demo:"))
    return read_grid(spec)


# -----------------------------------------------------------------------------
# scan
# -----------------------------------------------------------------------------


def run_scan(
    config: ExperimentConfig,
    target: str,
    *,
    protocol: str = "both",
    blockers: bool = True,
    cell: int = 16,
) -> int:
    """Address a target grid with DPA and/or progressive scan.

    Writes the settled grid, a signed error heatmap, the charge trace and a
    summary per protocol into the output directory.
    """
    from .crossbar import far_corner_attenuation  # noqa: PLC0415
    from .formats import write_grid, write_trace  # noqa: PLC0415
    from .report import error_summary, error_table, grid_summary  # noqa: PLC0415
    from .report import write_ppm, write_summary  # noqa: PLC0415
    from .scanner import scan_experiment  # noqa: PLC0415

    def action() -> None:
        grid = load_target(target)
        factor = config.scan.blockers_on if blockers else config.scan.blockers_off
        cfg = config.crossbar.electrodes(factor, fit_factor=config.scan.blockers_on)
        attenuation = far_corner_attenuation(cfg)
        out = Path(config.paths.out)
        rows = []
        for name in PROTOCOLS if protocol == "both" else (protocol,):
            try:
                outcome = scan_experiment(
                    cfg,
                    grid,
                    name,  # type: ignore[arg-type]
                    dyn=config.dynamics.to_config(),
                    dwell=config.scan.dwell,
                    dt=config.scan.dt,
                    cycles=config.scan.cycles,
                    v_supply=config.scan.v_supply,
                    compensate_input=config.scan.compensate,
                )
            except NotRepresentable as e:
                if protocol != "both":
                    raise
                _warn(f"{name}: cannot produce this target ({e})")
                continue
            stem = f"scan_{name.lower()}"
            write_grid(outcome.settled, out / f"{stem}_settled.csv", f"{name} settled grid")
            write_ppm(outcome.stats.per_pixel_error, out / f"{stem}_error.ppm", cell=cell)
            write_ppm(outcome.settled.values, out / f"{stem}_settled.ppm", cell=cell)
            write_trace(outcome.result.trace, out / f"{stem}_trace.csv")
            summary = {
                "protocol": name,
                "blocker_factor": factor,
                "r_segment": cfg.r_segment,
                "far_corner_attenuation": attenuation,
                **grid_summary(outcome.settled, "settled_"),
                **error_summary(outcome.stats),
            }
            write_summary(summary, out / f"{stem}_summary.txt")
            rows.append((name, outcome.stats))
        blocker_label = "blockers on" if blockers else "blockers off"
        console.print(error_table(rows, title=f"{target} ({blocker_label})"))

    return _guarded(action)


# -----------------------------------------------------------------------------
# gen / train
# -----------------------------------------------------------------------------


def run_gen(
    config: ExperimentConfig,
    n_samples: int,
    output: str,
    *,
    mode: str | None = None,
) -> int:
    """Generate a dataset file."""
    from .dataset import generate, save  # noqa: PLC0415

    def action() -> None:
        ds = config.dataset
        data = generate(
            n_samples,
            ds.seed,
            config.plate_config(),
            mode or ds.mode,  # type: ignore[arg-type]
            grid_n=ds.nodes,
            adjacency_cap=ds.cap,
            workers=ds.workers,
        )
        save(data, output)
        console.print(f"Wrote {n_samples} samples to {output}")

    return _guarded(action)


def run_train(
    config: ExperimentConfig,
    dataset: str,
    output: str,
    *,
    inverse: bool = False,
    test: str | None = None,
    sizes: Sequence[int] = (),
) -> int:
    """Train a forward (voltages → surface) or inverse network."""
    from .dataset import fingerprint, load  # noqa: PLC0415
    from .mlp import init, learning_curve, save_model, train  # noqa: PLC0415
    from .report import curve_table, mapping_table  # noqa: PLC0415

    def action() -> None:
        ds = config.dataset
        expected = fingerprint(config.plate_config(), ds.mode, ds.nodes, ds.cap)  # type: ignore[arg-type]
        data = load(dataset, expected_fingerprint=expected)
        x, y = data.voltages, data.displacements
        if inverse:
            x, y = y, x
        holdout = None
        if test:
            t = load(test, expected_fingerprint=expected)
            holdout = (t.displacements, t.voltages) if inverse else (t.voltages, t.displacements)
        spec = config.mlp.to_spec(x.shape[1], y.shape[1], inverse=inverse)

        if sizes:
            if holdout is None:
                msg = "--sizes needs a --test dataset"
                raise ValueError(msg)
            console.print(curve_table(learning_curve((x, y), holdout, sizes, spec)))

        model, report = train(init(spec), x, y, holdout=holdout)
        save_model(model, output)
        console.print(
            mapping_table(
                {
                    "direction": "inverse" if inverse else "forward",
                    "samples": len(x),
                    "epochs": report.epochs,
                    "R²": report.r2,
                    "MSE": report.mse,
                    "seconds": report.seconds,
                    "model": output,
                },
                title="training",
            )
        )

    return _guarded(action)


# -----------------------------------------------------------------------------
# predict / invert
# -----------------------------------------------------------------------------


def run_predict(
    config: ExperimentConfig,
    model_path: str,
    voltages: str,
    *,
    output: str | None = None,
    simulate: bool = False,
) -> int:
    """Predict the surface of a voltage grid and report inference latency."""
    from .control import forward_surface, simulate_surface, surface_r2  # noqa: PLC0415
    from .formats import write_heightfield  # noqa: PLC0415
    from .mlp import load_model, time_predict  # noqa: PLC0415
    from .report import mapping_table  # noqa: PLC0415

    def action() -> None:
        model = load_model(model_path)
        grid = load_target(voltages)
        plate = config.plate_config()
        field = forward_surface(model, grid, plate)
        latency = time_predict(model, grid.flatten())
        items: dict[str, object] = {
            "z min (mm)": float(field.z.min()),
            "z max (mm)": float(field.z.max()),
            "latency (ms)": 1000 * latency,
        }
        if simulate:
            sim = simulate_surface(grid, plate, field.shape[0])
            items["R² vs simulator"] = surface_r2(field.z, sim.z)
        if output:
            write_heightfield(field, output)
            items["output"] = output
        console.print(mapping_table(items, title="forward prediction"))

    return _guarded(action)


def run_invert(
    config: ExperimentConfig,
    model_path: str,
    surfaces: Sequence[str],
    *,
    snap: bool = True,
    simulate: bool = True,
    cell: int = 16,
) -> int:
    """Voltages for one target surface or a morphing sequence of them."""
    from rich.table import Table  # noqa: PLC0415

    from .control import invert_surface  # noqa: PLC0415
    from .formats import read_heightfield, write_atomic, write_grid, write_heightfield  # noqa: PLC0415
    from .mlp import load_model  # noqa: PLC0415
    from .report import histogram_csv, surface_summary, write_ppm, write_summary  # noqa: PLC0415

    def action() -> None:
        model = load_model(model_path)
        plate = config.plate_config()
        out = Path(config.paths.out)
        table = Table(title="inverse control")
        for name in ("step", "surface", "mean |dz|", "RMS dz", "% of height", "R²"):
            table.add_column(name, justify="right")
        for step, path in enumerate(surfaces, start=1):
            result = invert_surface(
                model,
                read_heightfield(path),
                plate,
                mode=config.dataset.mode,  # type: ignore[arg-type]
                snap=snap,
                simulate=simulate,
            )
            stem = f"invert_{step:02d}"
            write_grid(result.voltages, out / f"{stem}_voltages.csv", f"voltages for {path}")
            write_ppm(result.voltages.values, out / f"{stem}_voltages.ppm", cell=cell)
            if result.error is None or result.achieved is None:
                table.add_row(str(step), path, "-", "-", "-", "-")
                continue
            write_heightfield(result.achieved, out / f"{stem}_achieved.csv")
            nodes = result.achieved.shape
            write_ppm(result.error.signed.reshape(nodes), out / f"{stem}_error.ppm", cell=cell)
            write_atomic(out / f"{stem}_histogram.csv", histogram_csv(result.error))
            write_summary(
                {**surface_summary(result.error), "r2": result.r2},
                out / f"{stem}_summary.txt",
            )
            table.add_row(
                str(step),
                path,
                f"{result.error.mean_abs:.3f}",
                f"{result.error.mse_rm:.3f}",
                f"{result.error.pct_of_max_height:.1f}",
                f"{result.r2:.4f}",
            )
        console.print(table)

    return _guarded(action)


# -----------------------------------------------------------------------------
# report / calibrate
# -----------------------------------------------------------------------------


def _is_heightfield(path: str) -> bool:
    with Path(path).open(encoding="utf-8") as f:
        return f.readline().startswith("x,y,z")


def run_report(
    config: ExperimentConfig,
    inputs: Sequence[str],
    *,
    sizes: Sequence[int] = DEFAULT_SIZES,
    cloud: str | None = None,
    reference: str | None = None,
    bbox: str | None = None,
    cell: int = 16,
) -> int:
    """Heatmaps and summaries for grids or heightfields, plus an optional
    measured-versus-simulated surface comparison."""
    from .formats import read_heightfield, write_atomic  # noqa: PLC0415
    from .pointcloud import BoundingBox, compare_surfaces, read_xyz  # noqa: PLC0415
    from .report import (  # noqa: PLC0415
        complexity_table,
        grid_summary,
        histogram_csv,
        mapping_table,
        surface_summary,
        write_pgm,
        write_ppm,
        write_summary,
    )

    def action() -> None:
        out = Path(config.paths.out)
        summary: dict[str, object] = {}
        for spec in inputs:
            stem = Path(spec.removeprefix("demo:")).stem
            if not spec.startswith("demo:") and _is_heightfield(spec):
                values = read_heightfield(spec).z
            else:
                grid = load_target(spec)
                values = grid.values
                summary.update(grid_summary(grid, f"{stem}_"))
            write_pgm(values, out / f"{stem}.pgm", cell=cell, comment=spec)
            write_ppm(values, out / f"{stem}.ppm", cell=cell, comment=spec)
            summary[f"{stem}_range"] = float(np.ptp(values))

        if cloud or reference:
            if not (cloud and reference):
                msg = "--cloud and --reference must be given together"
                raise ValueError(msg)
            box = BoundingBox.parse(bbox) if bbox else None
            report = compare_surfaces(read_xyz(cloud), read_heightfield(reference), bbox=box)
            write_atomic(out / "surface_histogram.csv", histogram_csv(report))
            summary.update({f"surface_{k}": v for k, v in surface_summary(report).items()})
            console.print(mapping_table(surface_summary(report), title="surface error"))

        if summary:
            write_summary(summary, out / "summary.txt")
        console.print(complexity_table(sizes))

    return _guarded(action)


def run_calibrate(config: ExperimentConfig) -> int:
    """Fit electrode resistance and pixel time constants to the reference numbers."""
    from .crossbar import far_corner_attenuation  # noqa: PLC0415
    from .report import mapping_table  # noqa: PLC0415
    from .scanner import REFERENCE_DECAY, calibrate_dynamics  # noqa: PLC0415

    def action() -> None:
        cfg = config.crossbar.electrodes(config.scan.blockers_on)
        dyn = calibrate_dynamics(*REFERENCE_DECAY, base=config.dynamics.to_config())
        console.print(
            mapping_table(
                {
                    "r_segment (ohm)": cfg.r_segment,
                    "far-corner attenuation": far_corner_attenuation(cfg),
                    "tau_charge (s)": dyn.tau_charge,
                    "tau_float (s)": dyn.tau_float,
                },
                title="calibration",
            )
        )

    return _guarded(action)
