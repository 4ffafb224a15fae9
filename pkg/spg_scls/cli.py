import argparse
import logging
import sys

from . import FactorPath, InitPolicy
from .commands import (EXIT_INPUT_ERROR, EXIT_NUMERICAL_ERROR, cmd_bench, cmd_compare, cmd_gen, cmd_solve)
from .data import Scenario
from .exceptions import InputError, NumericalError
from .export import Method
from .tools import configure_logging

_log = logging.getLogger(__name__)

EXIT_USAGE = 64


class Parser(argparse.ArgumentParser):
    """Usage errors exit with their own code; argparse's default 2 means "not converged" here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_generation(parser: argparse.ArgumentParser, grid: bool, required: bool = False):
    many = {"nargs": "+"} if grid else {}

    parser.add_argument("--m", type=int, required=grid or required, **many, help="number of samples")
    parser.add_argument("--n", type=int, required=grid or required, **many, help="number of features")
    parser.add_argument("--density", type=float, default=[1.0] if grid else 1.0, **many,
                        help="fraction of nonzero entries in X (1 for dense)")
    parser.add_argument("--gamma", type=float, default=[0.1] if grid else None, **many,
                        help="follower's manipulation cost (default 0.1, or the instance descriptor's value)")
    parser.add_argument("--scenario", choices=[s.value for s in Scenario if s is not Scenario.EXPLICIT or not grid],
                        default=["modest"] if grid else "modest", **many,
                        help="how the provider targets z are synthesized")
    parser.add_argument("--seed", type=int, default=0,
                        help="RNG seed (the base seed of the grid; trial t uses seed + t)" if grid else "RNG seed")
    parser.add_argument("--noise", type=float, default=0.1, help="label noise standard deviation")
    parser.add_argument("--modest-scale", type=float, default=0.5)
    parser.add_argument("--severe-scale", type=float, default=2.0)


def _add_solver(parser: argparse.ArgumentParser):
    parser.add_argument("--rho", type=float, default=5.0, help="ADMM penalty parameter")
    parser.add_argument("--eps", type=float, default=1e-8, help="residual tolerance")
    parser.add_argument("--max-iters", type=int, default=10_000)
    parser.add_argument("--init", choices=[p.value for p in InitPolicy], default=InitPolicy.LAST_AXIS.value)
    parser.add_argument("--init-seed", type=int, default=0)
    parser.add_argument("--path", choices=[p.value for p in FactorPath], default=FactorPath.AUTO.value,
                        help="factorization path of cd-admm")


def build_parser() -> argparse.ArgumentParser:
    parser = Parser(prog="spg_scls", description="Solve least-squares Stackelberg prediction games via SCLS.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for progress, -vv for debugging")

    subparsers = parser.add_subparsers(dest="command", required=True)

    gen = subparsers.add_parser("gen", help="write a synthetic instance and its descriptor")
    _add_generation(gen, grid=False, required=True)
    gen.add_argument("--z-file", help="target vector for the explicit scenario, one value per line")
    gen.add_argument("--out", default=".", help="output directory")
    gen.set_defaults(func=cmd_gen)

    solve = subparsers.add_parser("solve", help="solve one instance and print its run record")
    _add_generation(solve, grid=False)
    solve.add_argument("--z-file")
    solve.add_argument("--instance", help="sparse text instance (.spm) or CSV file instead of generating one")
    solve.add_argument("--y-column", default="y", help="label column of a CSV instance")
    solve.add_argument("--z-column", help="target column of a CSV instance (synthesized when absent)")
    solve.add_argument("--method", choices=[m.value for m in Method], default=Method.CD_ADMM.value)
    _add_solver(solve)
    solve.add_argument("--trace", help="write the per-iteration residuals to this CSV file")
    solve.add_argument("--check", action="store_true",
                       help="also run the oracle: relative error and global-optimality certificate")
    solve.set_defaults(func=cmd_solve)

    compare = subparsers.add_parser("compare", help="accuracy against the oracle over a grid of instances")
    _add_generation(compare, grid=True)
    compare.add_argument("--method", nargs="+", choices=[m.value for m in Method], default=[Method.CD_ADMM.value])
    compare.add_argument("--trials", type=int, default=10)
    _add_solver(compare)
    compare.add_argument("--out", help="CSV table (JSON on stdout otherwise)")
    compare.set_defaults(func=cmd_compare)

    bench = subparsers.add_parser("bench", help="ADMM against CD-ADMM wall-clock over a grid of instances")
    _add_generation(bench, grid=True)
    bench.add_argument("--repeats", type=int, default=3, help="timings are medians over this many runs")
    bench.add_argument("--with-oracle", action="store_true")
    _add_solver(bench)
    bench.add_argument("--out", help="CSV table (JSON on stdout otherwise)")
    bench.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "solve" and args.instance is None and (args.m is None or args.n is None):
        parser.error("solve needs --instance or both --m and --n")
    if getattr(args, "trials", 1) < 1 or getattr(args, "repeats", 1) < 1:
        parser.error("--trials and --repeats must be at least 1")

    configure_logging(args.verbose)

    try:
        return args.func(args)
    except InputError as e:
        _log.error("%s: %s", type(e).__name__, e)
        return EXIT_INPUT_ERROR
    except OSError as e:
        _log.error("%s", e)
        return EXIT_INPUT_ERROR
    except NumericalError as e:
        _log.error("%s: %s", type(e).__name__, e)
        return EXIT_NUMERICAL_ERROR
