"""Command-line interface.

Subcommands map to the sweep kinds (``sndr-sweep``, ``minpower``, ``maxmin``,
``ser``) plus ``validate`` for the self-check suites.  Exit codes: 0 success,
1 validation failure, 2 configuration error.
"""

import argparse
import sys

from .config import ScenarioConfig, apply_overrides, load_config
from .errors import ConfigError
from .experiments import run_sweep
from .validation import SUITES, validate

_SWEEP_COMMANDS = {
    "sndr-sweep": "sndr",
    "minpower": "minpower",
    "maxmin": "maxmin",
    "ser": "ser",
}


def _add_sweep_parser(sub, command):
    p = sub.add_parser(command, help=f"run a {command} experiment sweep")
    p.add_argument("--config", help="scenario config file (defaults apply "
                                    "when omitted)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                   dest="overrides",
                   help="override a config entry (repeatable; wins over the "
                        "config file)")
    return p


def build_parser():
    parser = argparse.ArgumentParser(
        prog="onebitmimo",
        description="Distributed massive MIMO with 1-bit ADCs: link "
                    "simulation and power/dithering optimization")
    sub = parser.add_subparsers(dest="command", required=True)
    for command in _SWEEP_COMMANDS:
        _add_sweep_parser(sub, command)
    v = sub.add_parser("validate", help="run the oracle self-check suites")
    v.add_argument("--only", choices=sorted(SUITES), help="run a single suite")
    v.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "validate":
        return validate(only=args.only, seed=args.seed)
    try:
        cfg = load_config(args.config) if args.config else ScenarioConfig()
        apply_overrides(cfg, args.overrides)
        paths = run_sweep(cfg, args.out, _SWEEP_COMMANDS[args.command])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
