"""
Command-line surface.

    solve <problem-file> [--mode haugazeau|fejer] [--eps E] [--gamma G]
          [--mu M] [--lambda L] [--max-iter N] [--tau-tol T]
          [--dist-tol D] [--trace PATH] [--summary PATH]

The summary is printed to stdout as JSON. Exit codes: 0 when the solve ends
at a Kuhn-Tucker point or on the step tolerance, 1 on breakdown, max_iters
or non-finite values, 2 on usage, parse or validation errors.
"""

import argparse
import logging
import sys
from typing import Optional, Sequence

from app.core.errors import (
    NonFiniteError,
    ParameterError,
    ProblemParseError,
    ProblemValidationError,
)
from app.services.run_service import RunService

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ktsolve", description="Best approximation from a Kuhn-Tucker set")
    commands = parser.add_subparsers(dest="command", required=True)

    solve = commands.add_parser("solve", help="Solve a problem file")
    solve.add_argument("problem", help="Path to a JSON problem file")
    solve.add_argument("--mode", choices=["haugazeau", "fejer"])
    solve.add_argument("--eps", type=float, dest="epsilon")
    solve.add_argument("--gamma", type=float)
    solve.add_argument("--mu", type=float)
    solve.add_argument("--lambda", type=float, dest="lam")
    solve.add_argument("--max-iter", type=int, dest="max_iters")
    solve.add_argument("--tau-tol", type=float, dest="tau_tol")
    solve.add_argument("--dist-tol", type=float, dest="dist_tol")
    solve.add_argument("--trace", help="Trace output (.csv, or .parquet)")
    solve.add_argument("--summary", help="Summary JSON output")
    return parser


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK

    overrides = {
        "mode": args.mode,
        "epsilon": args.epsilon,
        "gamma": args.gamma,
        "mu": args.mu,
        "lam": args.lam,
        "max_iters": args.max_iters,
        "tau_tol": args.tau_tol,
        "dist_tol": args.dist_tol,
    }
    try:
        outcome = RunService().run_file(
            args.problem,
            overrides=overrides,
            trace_path=args.trace,
            summary_path=args.summary,
        )
    except (FileNotFoundError, ProblemParseError, ProblemValidationError, ParameterError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except NonFiniteError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NOT_CONVERGED

    print(outcome.summary.model_dump_json(indent=2))
    if outcome.exit_code != EXIT_OK:
        logger.warning("Solve ended with status %s", outcome.summary.status)
    return outcome.exit_code
