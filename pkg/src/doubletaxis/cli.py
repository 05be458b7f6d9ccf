"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
import warnings

from .driver import DEFAULT_SNAPSHOTS, EXPERIMENTS, ConfigError, SimulationConfig, preset, run

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

logger = logging.getLogger("doubletaxis")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _positive_float(text: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not val > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return val


def _times(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad time list: {text!r}")


def _key_value(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    return key.strip(), value.strip()


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="doubletaxis",
                 description="Two-phenotype tumour invasion with haptotaxis and repellent taxis.")
    ap.add_argument("--experiment", default="exp1", choices=EXPERIMENTS)
    ap.add_argument("--ic", default="stripes", choices=("stripes", "random"))
    ap.add_argument("--grid", type=int, default=128, help="cells per side (default 128)")
    ap.add_argument("--tend", type=float, default=None, help="final time (default 10)")
    ap.add_argument("--cfl", type=_positive_float, default=None)
    ap.add_argument("--dt-max", type=_positive_float, default=None)
    ap.add_argument("--dt", type=_positive_float, default=None, help="fixed step, overrides CFL control")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="out")
    ap.add_argument("--snapshots", type=_times, default=None, help="comma separated output times")
    ap.add_argument("--set", dest="overrides", action="append", type=_key_value, default=[],
                    metavar="KEY=VALUE", help="override a model parameter (repeatable)")
    ap.add_argument("--denominator", choices=("section2", "appendixb"), default=None)
    ap.add_argument("--diag-every", type=int, default=50)
    ap.add_argument("--plot", action="store_true", help="also render a PNG per snapshot")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def parse_cli(argv) -> SimulationConfig:
    args = build_parser().parse_args(argv)
    config = preset(args.experiment)
    config.ic = args.ic
    config.grid_n = args.grid
    config.seed = args.seed
    config.out_dir = args.out
    config.diagnostics_every = args.diag_every
    config.plot = args.plot
    if args.tend is not None:
        config.t_end = args.tend
    if args.snapshots is not None:
        config.snapshot_times = args.snapshots
    else:
        times = [t for t in DEFAULT_SNAPSHOTS if t <= config.t_end]
        if not times or times[-1] < config.t_end:
            times.append(config.t_end)
        config.snapshot_times = times
    if args.dt is not None and args.cfl is not None:
        warnings.warn("--dt given together with --cfl; the fixed step wins", stacklevel=2)
    if args.cfl is not None:
        if args.cfl > 1:
            raise ConfigError("--cfl must be in (0, 1]")
        config.controls.cfl = args.cfl
    if args.dt_max is not None:
        config.controls.dt_max = args.dt_max
    if args.dt is not None:
        config.controls.dt_fixed = args.dt
    if args.denominator is not None:
        config.model.denominator_form = {"section2": "Section2", "appendixb": "AppendixB"}[args.denominator]
    for key, value in args.overrides:
        try:
            config.model.set(key, value)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"--set {key}={value}: {exc}") from exc
        config.overrides[key] = getattr(config.model, key)
    config.validate()
    return config


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if "-h" in argv or "--help" in argv:
        build_parser().print_help()
        return EXIT_OK
    try:
        config = parse_cli(argv)
    except ConfigError as exc:
        print(f"doubletaxis: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if "-v" in argv or "--verbose" in argv else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        summary = run(config, keep_states=False)
    except OSError as exc:
        print(f"doubletaxis: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    if summary.abort is not None:
        print(f"doubletaxis: numerical failure: {summary.abort['reason']}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"{summary.steps} steps, {len(summary.snapshot_paths)} snapshots, manifest {summary.manifest_path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
