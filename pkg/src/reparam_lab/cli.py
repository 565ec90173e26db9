"""Command-line entry point: ``reparam-lab run|catalog|demo``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import runner
from .catalog import render
from .errors import BoundInputError, ConfigurationError, DistractorError, NumericalDivergenceError
from .scenarios import SCENARIOS, scenario_config

LOG_ENV = "REPARAM_LAB_LOG"


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text):
    v = int(text)
    if v < 2:
        raise argparse.ArgumentTypeError("need at least 2 episodes")
    return v


def _add_run_flags(p):
    p.add_argument("--seed", type=_u64, help="override the config seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--episodes", type=_positive, help="override n_episodes")
    p.add_argument("--strict", action="store_true",
                   help="treat holds_within_margin as a failure")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reparam-lab",
        description="Compute generalization-gap bounds for reparameterized RL and certify them by simulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the checks listed in a YAML config")
    p_run.add_argument("config")
    _add_run_flags(p_run)
    sub.add_parser("catalog", help="print every implemented bound with its formula")
    p_demo = sub.add_parser("demo", help="run a bundled scenario")
    p_demo.add_argument("scenario", choices=sorted(SCENARIOS))
    _add_run_flags(p_demo)
    return parser


def _configure_logging():
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _print_summary(manifest, out):
    width = max(len(k) for k in manifest.summary)
    for name, verdict in manifest.summary.items():
        print(f"{name:<{width}}  {verdict}")
    print(f"reports written to {out}")


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    if args.command == "catalog":
        sys.stdout.write(render())
        return runner.EXIT_OK

    try:
        config = scenario_config(args.scenario) if args.command == "demo" else args.config
        manifest = runner.run_suite(
            config, seed=args.seed, out=args.out, episodes=args.episodes, strict=args.strict
        )
    except (ConfigurationError, BoundInputError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return runner.EXIT_CONFIG
    except (NumericalDivergenceError, DistractorError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return runner.EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return runner.EXIT_IO
    _print_summary(manifest, manifest.config["output_dir"])
    return manifest.exit_code


if __name__ == "__main__":
    sys.exit(main())
