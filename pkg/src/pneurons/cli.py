"""Command-line entry point: ``pneurons <experiment> [options]``."""
from __future__ import annotations

import argparse
import sys
from importlib import resources
from typing import Optional, Sequence

from .entropy import check_golden
from .errors import PNeuronError
from .harness import EXPERIMENTS, SCHEMA, ConfigError, load_config_file, resolve, run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def default_golden_path() -> str:
    return str(resources.files("pneurons") / "data" / "lfsr32_golden.txt")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pneurons", description="Probabilistic neuron experiments.")
    ap.add_argument("--golden", nargs="?", const="", metavar="PATH",
                    help="check the 32-bit LFSR against a golden vector file and exit")
    sub = ap.add_subparsers(dest="experiment", metavar="EXPERIMENT")
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", help="INI file with [experiment] and [%s] sections" % name)
        sp.add_argument("--seed", help="master seed, 0 <= seed < 2**64")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--workers", help="parallel workers; outputs do not depend on this")
        for key in SCHEMA[name]:
            sp.add_argument("--" + key.replace("_", "-"), dest=key, metavar=key.upper())
    return ap


def _run_golden(path: str) -> int:
    path = path or default_golden_path()
    try:
        ok, mismatches = check_golden(path)
    except (OSError, ValueError) as exc:
        print(f"golden: cannot read {path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for i, want, got in mismatches:
        print(f"golden: step {i}: expected {want:08x}, got {got:08x}", file=sys.stderr)
    print(f"golden: {'PASS' if ok else 'FAIL'} ({path})")
    return EXIT_OK if ok else EXIT_RUNTIME


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    if args.golden is not None:
        return _run_golden(args.golden)
    if args.experiment is None:
        _parser().print_usage(sys.stderr)
        return EXIT_CONFIG
    overrides = {k: getattr(args, k) for k in list(SCHEMA[args.experiment]) + ["seed", "out", "workers"]}
    try:
        values, lines = load_config_file(args.config) if args.config else ({}, {})
        cfg = resolve(args.experiment, values, overrides, lines, args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run(cfg)
    except (PNeuronError, OSError, ArithmeticError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for key, value in result.summary.items():
        print(f"{key} = {value}")
    print(f"wrote {len(result.files)} files to {cfg.output_path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
