"""
ampchannel command-line entry point.

Subcommands:

  run <config>...      run each config and write report, histograms and manifest
  compare <config>     laser run against an ideal PIA at the laser's measured gain
  fig2                 stationary photon statistics: Fokker–Planck against quantum jumps
  fig3                 `compare` on the shipped saturated-laser config
  validate <config>    validity margins of a laser config, nothing is run
  rerun <manifest>     regenerate a run from its manifest and verify the checksums

Usage: python -m ampchannel [--threads N] [--seed-override S] [--out-dir DIR] <subcommand> ...
"""

import argparse
import logging
from pathlib import Path
from typing import List, Optional

from .experiments.config_loader import ConfigError, load_config
from .experiments.outputs import emit_comparison, emit_stationary
from .experiments.runner import (
    ExperimentError,
    compare_at_matched_gain,
    run_batch,
    run_fig2_validation,
    run_fig3_comparison,
    rerun_from_manifest,
    validate_config,
    with_seed,
)
from .logging_utils import setup_logging

logger = logging.getLogger(__name__)

DEFAULT_OUT_DIR = Path("results")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ampchannel", description="Binary channels through optical amplifiers.")
    parser.add_argument("--threads", type=int, default=1, help="Worker threads (results do not depend on it)")
    parser.add_argument("--seed-override", type=int, default=None, help="Replace the seed of every config")
    parser.add_argument("--out-dir", type=Path, default=None, help="Write outputs under this directory")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="Run one or more experiment configs")
    run.add_argument("configs", nargs="+")
    compare = sub.add_parser("compare", help="Laser against a PIA at matched gain")
    compare.add_argument("config")
    sub.add_parser("fig2", help="Fokker–Planck against quantum-jump stationary statistics")
    sub.add_parser("fig3", help="Matched-gain comparison on the shipped saturated-laser config")
    validate = sub.add_parser("validate", help="Print the validity report of a config")
    validate.add_argument("config")
    rerun = sub.add_parser("rerun", help="Re-run a manifest and compare checksums")
    rerun.add_argument("manifest", type=Path)
    return parser


def _print_table(table: dict):
    for label, row in table.items():
        cells = ", ".join(f"{key}={value:.6g}" for key, value in row.items())
        print(f"{label}: {cells}")


def _command(args: argparse.Namespace) -> int:
    if args.command == "run":
        for cfg, report, files in run_batch(args.configs, threads=args.threads,
                                            seed_override=args.seed_override, out_dir=args.out_dir):
            print(f"{cfg.name}: G={report.gain_db:.3f} dB R={report.noise_figure_db:.3f} dB "
                  f"B={report.ber:.4e} I={report.mutual_information_bits:.6f} -> {files['report.yaml'].parent}")
        return 0

    if args.command in ("compare", "fig3"):
        if args.command == "compare":
            cfg = load_config(args.config)
            if args.seed_override is not None:
                cfg = with_seed(cfg, args.seed_override)
            comparison = compare_at_matched_gain(cfg, threads=args.threads)
        else:
            cfg = load_config("fig3_laser")
            comparison = run_fig3_comparison(threads=args.threads, seed_override=args.seed_override)
            if args.seed_override is not None:
                cfg = with_seed(cfg, args.seed_override)
        directory = (args.out_dir or DEFAULT_OUT_DIR) / f"{cfg.name}_matched_gain"
        emit_comparison(comparison, directory, cfg)
        _print_table(comparison.table())
        return 0

    if args.command == "fig2":
        seed = args.seed_override if args.seed_override is not None else 2
        result = run_fig2_validation(seed=seed, threads=args.threads)
        emit_stationary(result, (args.out_dir or DEFAULT_OUT_DIR) / "fig2")
        print(f"TV distance {result.distance:.4f} (combined error {result.error:.4f}): "
              f"{'agree' if result.passed else 'DISAGREE'}")
        return 0 if result.passed else 1

    if args.command == "validate":
        report = validate_config(load_config(args.config))
        if report is None:
            print("no validity conditions for this amplifier")
            return 0
        for name, margin in sorted(report.margins.items()):
            status = "ok" if margin > report.strictness else "FAIL"
            print(f"{name}: {margin:.4g} ({status})")
        return 0 if report.passed else 2

    if args.command == "rerun":
        directory = args.out_dir or args.manifest.parent / "rerun"
        result = rerun_from_manifest(args.manifest, directory, threads=args.threads)
        if result.identical:
            print(f"rerun identical -> {directory}")
            return 0
        print(f"rerun differs in: {', '.join(result.mismatched)}")
        return 1

    raise AssertionError(f"unhandled command {args.command}")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(getattr(logging, args.log_level))
    try:
        return _command(args)
    except (ConfigError, ExperimentError, FileNotFoundError) as exc:
        logger.error(str(exc))
        return 1
