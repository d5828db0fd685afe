"""morphgrid - simulate and control passively addressed morphing surfaces."""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path
from typing import NoReturn

# ANSI color codes for error messages
RED = "\033[91m"
YELLOW = "\033[93m"
BOLD = "\033[1m"
RESET = "\033[0m"


def _print_error(message: str) -> None:
    """Print an error message."""
    sys.stderr.write(f"{RED}{BOLD}error:{RESET} {message}\n")


def _error(message: str, code: int = 2) -> NoReturn:
    """Print an error message and exit."""
    _print_error(message)
    sys.exit(code)


def _warn(message: str) -> None:
    """Print a warning message."""
    sys.stderr.write(f"{YELLOW}{BOLD}warning:{RESET} {message}\n")


def _show_warning(message, category, filename, lineno, file=None, line=None) -> None:  # noqa: ANN001, ARG001, PLR0913
    _warn(str(message))


def _parse_sizes(text: str) -> list[int]:
    """Parse a comma-separated list of positive integers like '100,500,1000'."""
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        _error(f"invalid size list: {text}\n\nUse comma-separated integers (e.g., 100,500,1000)")
    if not sizes or min(sizes) < 1:
        _error(f"invalid size list: {text}")
    return sizes


def _setup_logging(verbose: int) -> None:
    from rich.console import Console  # noqa: PLC0415
    from rich.logging import RichHandler  # noqa: PLC0415

    level = logging.WARNING
    if verbose == 1:
        level = logging.INFO
    elif verbose > 1:
        level = logging.DEBUG
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="morphgrid",
        description="Crossbar addressing, plate mechanics and learned shape control "
        "for pixelated bending-actuator surfaces",
    )
    parser.add_argument(
        "--config",
        "-c",
        metavar="PATH",
        help="Path to a TOML config file (default: built-in defaults)",
    )
    parser.add_argument(
        "--seed",
        metavar="N",
        type=int,
        help="Random seed (overrides [dataset] seed)",
    )
    parser.add_argument(
        "--out",
        "-o",
        metavar="DIR",
        help="Output directory (overrides [paths] out)",
    )
    parser.add_argument(
        "--verbose",
        "-v",
        action="count",
        default=0,
        help="Log progress (-v) or debug details (-vv) to stderr",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    scan = sub.add_parser("scan", help="Address a target grid with DPA and/or progressive scan")
    scan.add_argument("target", help="Voltage grid CSV, or demo:1 … demo:4")
    scan.add_argument(
        "--protocol",
        choices=["PS", "DPA", "both"],
        default="both",
        help="Addressing protocol (default: both)",
    )
    scan.add_argument(
        "--blockers",
        choices=["on", "off"],
        default="on",
        help="Polymer blockers between pixels (default: on)",
    )

    gen = sub.add_parser("gen", help="Generate a training dataset")
    gen.add_argument("n", type=int, help="Number of samples")
    gen.add_argument("output", help="Dataset file to write")
    gen.add_argument("--mode", choices=["z", "total"], help="Displacement mode")

    train = sub.add_parser("train", help="Train a forward or inverse model")
    train.add_argument("dataset", help="Training dataset file")
    train.add_argument("output", help="Model file to write")
    train.add_argument("--inverse", action="store_true", help="Train surface → voltages")
    train.add_argument("--test", metavar="PATH", help="Held-out dataset file")
    train.add_argument(
        "--sizes",
        metavar="N,N,…",
        help="Also print a learning curve for these training sizes (needs --test)",
    )

    predict = sub.add_parser("predict", help="Predict the surface of a voltage grid")
    predict.add_argument("model", help="Forward model file")
    predict.add_argument("voltages", help="Voltage grid CSV, or demo:1 … demo:4")
    predict.add_argument("--output", metavar="PATH", help="Heightfield CSV to write")
    predict.add_argument(
        "--simulate", action="store_true", help="Compare with the plate simulator"
    )

    invert = sub.add_parser("invert", help="Voltages for target surfaces")
    invert.add_argument("model", help="Inverse model file")
    invert.add_argument("surfaces", nargs="+", help="Target heightfield CSV files, in order")
    invert.add_argument(
        "--no-snap",
        action="store_true",
        help="Keep raw network outputs instead of snapping to the 0.05 V lattice",
    )
    invert.add_argument(
        "--no-simulate",
        action="store_true",
        help="Skip re-simulating the predicted voltages",
    )

    report = sub.add_parser("report", help="Heatmaps and summaries")
    report.add_argument("inputs", nargs="*", help="Grid or heightfield CSV files, or demo:N")
    report.add_argument(
        "--sizes",
        metavar="N,N,…",
        default="6,10,20,50,100",
        help="Array sizes for the addressing-inputs table",
    )
    report.add_argument("--cloud", metavar="PATH", help="Measured point cloud (.xyz)")
    report.add_argument("--reference", metavar="PATH", help="Reference heightfield CSV")
    report.add_argument(
        "--bbox",
        metavar="X0,X1,Y0,Y1[,Z0,Z1]",
        help="Crop the point cloud to this box before comparing",
    )
    report.add_argument("--cell", type=int, default=16, help="Image pixels per grid cell")

    sub.add_parser("calibrate", help="Fit electrode resistance and time constants")
    return parser


def main() -> None:
    """Entry point for morphgrid."""
    parser = _build_parser()
    args = parser.parse_args()
    _setup_logging(args.verbose)
    warnings.showwarning = _show_warning

    from .common import ConfigError  # noqa: PLC0415
    from .config import load_config  # noqa: PLC0415

    config_path = Path(args.config) if args.config else None
    try:
        config = load_config(config_path)
    except ConfigError as e:
        _error(str(e))
    if args.seed is not None:
        config.dataset.seed = args.seed
    if args.out:
        config.paths.out = args.out

    from . import commands  # noqa: PLC0415

    if args.command == "scan":
        sys.exit(
            commands.run_scan(
                config,
                args.target,
                protocol=args.protocol,
                blockers=args.blockers == "on",
            )
        )
    elif args.command == "gen":
        if args.n < 1:
            _error("number of samples must be at least 1")
        sys.exit(commands.run_gen(config, args.n, args.output, mode=args.mode))
    elif args.command == "train":
        sizes = _parse_sizes(args.sizes) if args.sizes else []
        sys.exit(
            commands.run_train(
                config,
                args.dataset,
                args.output,
                inverse=args.inverse,
                test=args.test,
                sizes=sizes,
            )
        )
    elif args.command == "predict":
        sys.exit(
            commands.run_predict(
                config,
                args.model,
                args.voltages,
                output=args.output,
                simulate=args.simulate,
            )
        )
    elif args.command == "invert":
        sys.exit(
            commands.run_invert(
                config,
                args.model,
                args.surfaces,
                snap=not args.no_snap,
                simulate=not args.no_simulate,
            )
        )
    elif args.command == "report":
        sys.exit(
            commands.run_report(
                config,
                args.inputs,
                sizes=_parse_sizes(args.sizes),
                cloud=args.cloud,
                reference=args.reference,
                bbox=args.bbox,
                cell=args.cell,
            )
        )
    else:
        sys.exit(commands.run_calibrate(config))
