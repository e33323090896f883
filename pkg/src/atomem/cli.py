"""Command-line entry point ``atomem``."""

import argparse
import logging
import sys

from . import __version__
from .config import MODES, SUBCOMMANDS, load
from .errors import ConfigError, NumericalError

log = logging.getLogger("atomem")

HELP = {
    "params": "print every derived model parameter",
    "ringdown": "membrane ringdown with and without atoms",
    "sweep-power": "added damping against lattice power",
    "sweep-atoms": "added damping against atom number",
    "heating": "axial heating and survival under a driven membrane",
}


def _u64(text):
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="atomem", description="Atom-membrane coupling simulations.")
    parser.add_argument("--version", action="version", version=f"atomem {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", required=True, help="INI configuration file")
        p.add_argument("--out", help="output CSV path (default: stdout)")
        p.add_argument("--seed", type=_u64, help="random seed override")
        p.add_argument("--samples", type=_positive_int, help="thermal sample count override")
        p.add_argument("--mode", choices=MODES, help="homogeneous or thermal-ensemble damping")
        p.add_argument("--workers", type=_positive_int, help="parallel worker processes")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    # Imported late so that `--help` stays fast (numba compiles on import).
    from .experiments import run

    try:
        cfg = load(args.config, args.command, output=args.out, seed=args.seed, samples=args.samples,
                   mode=args.mode, workers=args.workers)
        run(cfg)
    except ConfigError as exc:
        print(f"atomem: configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"atomem: numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
