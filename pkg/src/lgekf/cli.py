"""Command line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 failed verification.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .ekf import NumericalFailure
from .gaussian import CovarianceError
from .harness import ConfigError, ExperimentConfig, format_summary, load_config, run_experiment, write_outputs

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VERIFY = 4

log = logging.getLogger("lgekf")


def _variants(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


def build_parser():
    parser = argparse.ArgumentParser(prog="lgekf", description="Lie group EKF experiments for INS/GNSS")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte Carlo experiment")
    run.add_argument("--config", type=Path, help="JSON experiment configuration (defaults if omitted)")
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int, help="master seed")
    run.add_argument("--out", type=Path, help="output directory")
    run.add_argument("--workers", type=int)
    run.add_argument("--variants", type=_variants, help="comma-separated, e.g. L-FO,R-FO")

    verify = sub.add_parser("verify", help="run the built-in property checks")
    verify.add_argument("--cases", type=int, default=200, help="random cases per group identity")

    sim = sub.add_parser("simulate", help="write one simulated trajectory as CSV")
    sim.add_argument("--config", type=Path)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--trial", type=int, default=0, help="trial index")
    sim.add_argument("--out", type=Path, default=Path("truth.csv"))
    return parser


def _load(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {"master_seed": args.seed}
    for key in ("trials", "workers", "variants"):
        overrides[key] = getattr(args, key, None)
    overrides["output_dir"] = getattr(args, "out", None) if args.command == "run" else None
    return cfg.with_overrides(**overrides)


def cmd_run(args):
    cfg = _load(args)

    def progress(done, total):
        log.info("trial %d/%d", done, total)

    result = run_experiment(cfg, progress)
    paths = write_outputs(result)
    print(format_summary(result))
    print(f"results written to {paths['manifest'].parent}")
    return EXIT_OK


def cmd_verify(args):
    from .checks import run_all

    results = run_all(args.cases)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_simulate(args):
    from .sim import simulate_trial, write_truth_csv

    cfg = _load(args)
    if args.trial < 0:
        raise ConfigError("trial index must be non-negative")
    trial = simulate_trial(cfg.trajectory, cfg.noise, cfg.initial_covariance, cfg.master_seed, args.trial)
    write_truth_csv(args.out, trial.truth, trial.sensors)
    print(f"wrote {trial.truth.states.shape[0]} rows to {args.out}")
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    handlers = {"run": cmd_run, "verify": cmd_verify, "simulate": cmd_simulate}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, CovarianceError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
