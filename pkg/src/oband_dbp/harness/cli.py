"""Command-line entry point: ``oband-dbp <command> [options]``.

Exit status is 0 on success, 1 for configuration or usage errors and 2 for
runtime or numerical failures.
"""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional

from ..metrics import aggregate
from .config import ConfigError, ExperimentConfig, load_preset, parse_config, shipped_presets
from .output import csv_text, plot_text
from .pipeline import DBP, EDC, evaluate, simulate_trace
from .sweeps import SweepResult, _base_meta, sweep_dbp_grid, sweep_kappa, sweep_lop

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--config", metavar="PATH", help="experiment TOML file")
    src.add_argument("--preset", metavar="NAME", help=f"shipped preset ({', '.join(shipped_presets())})")
    common.add_argument("--seed", type=_u64, help="master seed (overrides the config)")
    common.add_argument("--traces", type=_positive_int, help="traces per point (overrides the config)")
    common.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "plot"), default="csv", help="long CSV or per-curve plot data")
    common.add_argument("--workers", type=_positive_int, default=1, help="worker processes")

    p = _Parser(prog="oband-dbp", description="O-band single-step DBP simulator and sweep harness.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", parents=[common], help="EDC and DBP at the configured launch power")
    run.add_argument("--lop1", type=float, help="first-span launch power [dBm]")
    lop = sub.add_parser("sweep-lop", parents=[common], help="SNR versus first-span launch power")
    lop.add_argument("--lop1", type=float, nargs="+", help="launch powers [dBm] (default: config [sweep])")
    kap = sub.add_parser("sweep-kappa", parents=[common], help="DBP gain versus WH split")
    kap.add_argument("--kappa", type=float, nargs="+", help="splits (default: config [sweep])")
    kap.add_argument("--lop1", type=float, help="fixed launch power (default: DBP-optimal from a LOP sweep)")
    dbp = sub.add_parser("sweep-dbp", parents=[common], help="DBP dispersion / gamma grid search")
    dbp.add_argument("--lop1", type=float, help="launch power (default: config)")
    return p


def _load(args) -> ExperimentConfig:
    if args.config:
        cfg = parse_config(args.config)
    elif args.preset:
        cfg = load_preset(args.preset)
    else:
        raise ConfigError("one of --config or --preset is required")
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.traces is not None:
        changes["n_traces"] = args.traces
    return cfg.with_overrides(**changes) if changes else cfg


def run_point(cfg: ExperimentConfig, lop1_dbm: Optional[float] = None) -> SweepResult:
    lop1 = cfg.lop1_dbm if lop1_dbm is None else float(lop1_dbm)
    per = {EDC: [], DBP: []}
    for k in range(cfg.n_traces):
        t = simulate_trace(cfg, k, lop1)
        for comp in per:
            per[comp].append(evaluate(t, cfg, comp, lop1_dbm=lop1))
    meta = _base_meta(cfg, "run", "lop1_dbm")
    return SweepResult((aggregate(per[DBP]), aggregate(per[EDC])), meta)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "run":
            result = run_point(cfg, args.lop1)
        elif args.command == "sweep-lop":
            result = sweep_lop(cfg, args.lop1, workers=args.workers)
        elif args.command == "sweep-kappa":
            result = sweep_kappa(cfg, args.kappa, args.lop1, workers=args.workers)
        else:
            result = sweep_dbp_grid(cfg, lop1_dbm=args.lop1, workers=args.workers)
        text = csv_text(result) if args.format == "csv" else plot_text(result)
        if args.out:
            with open(args.out, "w", newline="") as f:
                f.write(text)
        else:
            sys.stdout.write(text)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, ArithmeticError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
