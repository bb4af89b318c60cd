"""Command-line entry point: ``hybridprec {run,sweep,validate,version}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .digital_design import design_digital
from .errors import ConfigError, HybridPrecodingError
from .harness import (
    ZF_FULLY_DIGITAL,
    SystemConfig,
    build_rf,
    emit_csv,
    parse_snr_range,
    run_experiment,
    strategy_build,
    trial_inputs,
)
from .precoding import SnrPoint, composite_power, sum_se, validate_rf

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

_LOG_LEVELS = {"quiet": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is reserved for runtime failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hybridprec", description="Hybrid precoding Monte Carlo simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def experiment_flags(p, snr_override):
        p.add_argument("--config", required=True, help="key = value config file")
        p.add_argument("--out", default="-", help="CSV destination (default: stdout)")
        p.add_argument("--threads", type=int, default=1, help="worker threads for trials")
        p.add_argument("--seed", type=int, default=None, help="override root_seed")
        p.add_argument("--no-timing", action="store_true",
                       help="write 0 in mean_build_seconds so output is byte-reproducible")
        if snr_override:
            p.add_argument("--snr-db", required=True, metavar="START:STEP:STOP",
                           help="inclusive SNR grid in dB; pass as --snr-db=START:STEP:STOP when START is negative")

    experiment_flags(sub.add_parser("run", help="run the configured experiment"), False)
    experiment_flags(sub.add_parser("sweep", help="run with an SNR grid override"), True)
    v = sub.add_parser("validate", help="check config and print diagnostics of one trial")
    v.add_argument("--config", required=True)
    v.add_argument("--seed", type=int, default=None)
    sub.add_parser("version", help="print version")
    return parser


def _setup_logging():
    level = _LOG_LEVELS.get(os.environ.get("HPL_LOG", "").strip().lower(), logging.WARNING)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger("hybridprec").setLevel(level)


def _load(args) -> SystemConfig:
    config = SystemConfig.load(args.config)
    if getattr(args, "seed", None) is not None:
        config = replace(config, root_seed=args.seed)
    if getattr(args, "snr_db", None):
        config = replace(config, snr_grid_db=parse_snr_range(args.snr_db))
    return config.validate()


def _cmd_run(args) -> int:
    config = _load(args)
    result = run_experiment(config, threads=args.threads, timing=not args.no_timing)
    if args.out == "-":
        emit_csv(result, sys.stdout)
    else:
        emit_csv(result, args.out)
        logging.getLogger("hybridprec").info("wrote %s", args.out)
    return EXIT_OK


def _cmd_validate(args) -> int:
    config = _load(args)
    out = sys.stdout
    print(f"config ok: N={config.num_antennas} K={config.num_users} N_RF={config.num_rf_chains} "
          f"L={config.num_paths} trials={config.num_trials} seed={config.root_seed}", file=out)
    inputs = trial_inputs(config, 0)
    snr_db = float(np.median(config.snr_grid_db))
    snr = SnrPoint.from_db(snr_db)
    print(f"smoke trial 0 at {snr_db:g} dB", file=out)
    for name in config.strategies:
        rf = build_rf(name, inputs, config)
        print(f"[{name}]", file=out)
        for line in validate_rf(rf).lines():
            print(f"  {line}", file=out)
        if name == ZF_FULLY_DIGITAL:
            precoder = strategy_build(name, inputs, config, snr, rf=rf)
        else:
            precoder, state = design_digital(rf, inputs.channel, snr, t_max=config.t_max,
                                             epsilon=config.epsilon, return_state=True)
            trace = " ".join(f"{x:.4f}" for x in state.objective_trace)
            print(f"  wmmse: iterations={state.iterations} converged={state.converged} "
                  f"last_change={state.last_change:.3e}", file=out)
            print(f"  wmmse sum-SE trace: {trace}", file=out)
        power = composite_power(precoder.rf, precoder.digital)
        print(f"  power trace: {power:.12f}", file=out)
        print(f"  sum SE: {sum_se(inputs.channel, precoder, snr):.6f} bits/s/Hz", file=out)
    return EXIT_OK


def main(argv=None) -> int:
    _setup_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "version":
            print(f"hybridprec {__version__}")
            return EXIT_OK
        if args.command in ("run", "sweep"):
            return _cmd_run(args)
        return _cmd_validate(args)
    except ConfigError as exc:
        print(f"hybridprec: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (HybridPrecodingError, ArithmeticError, np.linalg.LinAlgError, OSError) as exc:
        print(f"hybridprec: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
