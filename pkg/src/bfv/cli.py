"""Command-line entry point: ``bfv {solve,evaluate,sweep,compare,validate}``.

Exit codes: 0 success, 1 validation failure, 2 solver infeasible, 3 I/O or parse error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .analytics import UnplacedDemand, evaluate
from .domain import ValidationError
from .placement import Infeasible, RepairFailed, solve_point
from .scenario import (
    ParseError,
    SolverSettings,
    compare,
    load_scenario,
    placement_from_dict,
    placement_to_dict,
    report_to_dict,
    rows_to_csv,
    rows_to_gnuplot,
    run_sweep,
    validate,
)

EXIT_OK, EXIT_VALIDATION, EXIT_INFEASIBLE, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("bfv")


def _common() -> argparse.ArgumentParser:
    # SUPPRESS lets the flags appear before or after the subcommand without clobbering each other
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--mu", type=float, default=argparse.SUPPRESS, help="penalty weight (default: 10x max demand energy)")
    p.add_argument("--max-iter", type=int, default=argparse.SUPPRESS, help="MM iteration cap (default 100)")
    p.add_argument("--tol", type=float, default=argparse.SUPPRESS, help="MM convergence tolerance (default 1e-5)")
    p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help="only print results")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="bfv", parents=[common],
                                     description="Blockchain function placement and evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="place every function with the MM solver")
    p.add_argument("scenario")
    p.add_argument("--out", help="write the placement JSON here")
    p.add_argument("--relax-deadline", action="store_true",
                   help="if the block interval cannot be met, solve without it and flag the result")

    p = sub.add_parser("evaluate", parents=[common], help="evaluate a given placement")
    p.add_argument("scenario")
    p.add_argument("placement")

    p = sub.add_parser("sweep", parents=[common], help="run the scenario's parameter sweep")
    p.add_argument("scenario")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--gnuplot", help="also write a gnuplot data file")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("compare", parents=[common], help="BFV versus mining-only offload at one point")
    p.add_argument("scenario")

    p = sub.add_parser("validate", parents=[common], help="Monte Carlo check of the probability formulas")
    p.add_argument("scenario")
    p.add_argument("--trials", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _solver_settings(args, base: SolverSettings) -> SolverSettings:
    changes = {}
    if hasattr(args, "mu"):
        changes["mu"] = args.mu
    if hasattr(args, "max_iter"):
        changes["max_iter"] = args.max_iter
    if hasattr(args, "tol"):
        changes["tol"] = args.tol
    return replace(base, **changes)


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=str))


def _run(args) -> int:
    quiet = getattr(args, "quiet", False)
    scenario = load_scenario(args.scenario)
    scenario.solver = _solver_settings(args, scenario.solver)

    if args.command == "solve":
        sol = solve_point(scenario.instance, relax_deadline=args.relax_deadline, **scenario.solver.kwargs())
        if sol.report is None:
            log.error("%s", sol.status)
            return EXIT_INFEASIBLE
        if args.out:
            Path(args.out).write_text(json.dumps(placement_to_dict(sol.placement), indent=2) + "\n")
        _emit({"status": sol.status, "iterations": sol.iterations, "report": report_to_dict(sol.report),
               **({} if args.out else {"placement": placement_to_dict(sol.placement)})})
        return EXIT_OK

    if args.command == "evaluate":
        try:
            data = json.loads(Path(args.placement).read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(f"{args.placement}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        report = evaluate(placement_from_dict(data), scenario.instance)
        _emit(report_to_dict(report))
        return EXIT_OK

    if args.command == "sweep":
        if scenario.sweep is None:
            raise ParseError(f"{args.scenario}: no 'sweep' section")
        rows = run_sweep(scenario, workers=args.workers)
        Path(args.out).write_text(rows_to_csv(rows))
        if args.gnuplot:
            Path(args.gnuplot).write_text(rows_to_gnuplot(rows))
        if not quiet:
            log.info("wrote %d rows to %s", len(rows), args.out)
        return EXIT_OK

    if args.command == "compare":
        _emit(compare(scenario).to_dict())
        return EXIT_OK

    if args.command == "validate":
        result = validate(scenario, trials=args.trials, seed=args.seed)
        if not quiet:
            print(result.table())
            print("PASS" if result.passed else "FAIL")
        return EXIT_OK if result.passed else EXIT_VALIDATION

    raise AssertionError(args.command)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if getattr(args, "quiet", False) else logging.INFO,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return _run(args)
    except ValidationError as exc:
        for v in exc.violations:
            log.error("%s", v)
        return EXIT_VALIDATION
    except (Infeasible, RepairFailed) as exc:
        log.error("infeasible: %s", exc)
        return EXIT_INFEASIBLE
    except (ParseError, UnplacedDemand, OSError) as exc:
        log.error("%s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
