"""Command line interface: ``gravicut {run,sweep,validate}``.

Exit codes: 0 success, 1 a validation property failed, 2 configuration or
I/O error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, ExperimentConfig, apply_setting, load_config
from .runner import cmd_run, cmd_sweep
from .validate import run_validation

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

# flag name -> config key
OVERRIDES = {"objective": "objective", "noise": "noise", "dim": "dims", "budget": "budgets",
             "seeds": "seeds", "delta": "delta", "out": "out", "suite": "suite"}


def build_parser():
    parser = argparse.ArgumentParser(prog="gravicut",
                                     description="Noisy zeroth-order convex optimization.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, help_text in (("run", "one CSV row per (dim, budget, seed)"),
                            ("sweep", "runs plus median summary and log-log plot"),
                            ("validate", "run the property batteries")):
        p = sub.add_parser(verb, help=help_text)
        p.add_argument("--config", metavar="PATH")
        p.add_argument("--objective")
        p.add_argument("--noise")
        p.add_argument("--dim", help="comma separated dimensions")
        p.add_argument("--budget", help="comma separated budgets")
        p.add_argument("--seeds", help="count N (seeds 0..N-1) or comma list")
        p.add_argument("--delta")
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--trace", action="store_true", default=None)
        p.add_argument("--suite", metavar="NAME")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="any config key, e.g. --set q=4")
    return parser


def resolve_config(args):
    """Config file first, then flags (flags win)."""
    config = load_config(args.config) if args.config else ExperimentConfig()
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        apply_setting(config, *item.split("=", 1))
    for flag, key in OVERRIDES.items():
        value = getattr(args, flag)
        if value is not None:
            apply_setting(config, key, value)
    if args.trace:
        config.trace = True
    return config


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = resolve_config(args)
        if args.verb == "validate":
            checks = run_validation(config.suite, seed=config.master_seed)
            return EXIT_OK if all(c.passed for c in checks) else EXIT_FAIL
        config.validate()
        if args.verb == "run":
            cmd_run(config)
        else:
            for row in cmd_sweep(config):
                print(f"d={row['dim']} n={row['budget']} median_regret={row['median_regret']} "
                      f"iqr={row['iqr']}")
    except (ConfigError, ValueError) as exc:
        print(f"gravicut: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"gravicut: I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
