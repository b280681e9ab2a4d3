# Evolin solves evolutionary inclusions on exponentially weighted time lines.
# Copyright (C) 2024 The Evolin Development Team
#
# This file is part of Evolin.
#
# Evolin is free software; you can redistribute it and/or
# modify it under the terms of the GNU General Public License
# as published by the Free Software Foundation; either version 3
# of the License, or (at your option) any later version.
#
# Evolin is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU Lesser General Public License
# along with this program; if not, see <http://www.gnu.org/licenses/>
#
# --
"""The ``evolin`` command: run scenario files and the property suite.

Exit statuses of ``evolin run``:

- 0: solved and all requested checks passed
- 1: solved, but a check failed or the Maxwell structure was violated
- 2: the scenario file is invalid (the message names the offending field)
- 3: a hypothesis is violated, e.g. the positivity constant c_est <= 0
- 4: no convergence (report.json is still written)
"""

import argparse
import logging
import os
import sys
from pathlib import Path

import attrs
import numpy as np

from ..errors import ContractError, ConvergenceError, HypothesisViolation, StructuralError
from ..harness import (
    CheckReport,
    causality_test,
    compact_support,
    lipschitz_test,
    monotone_lambda_test,
    negative_controls,
    regularity_test,
    rho_independence_test,
    route_agreement_test,
    yosida_bounds_test,
)
from ..maxwell import MaxwellScenario, build_operators, run, saturation_study
from ..reports import write_convergence, write_json, write_solution
from ..runners import ConcurrentRunner, SerialRunner
from ..scenario import CHECKS, ScenarioSpec, load_scenario
from ..solver import Problem, SolveReport, solve
from ..tasks import SuiteSettings, Task, build_suite, constants_table

__all__ = ("main", "run_scenario", "run_suite")


EXIT_OK = 0
EXIT_CHECKS = 1
EXIT_SCHEMA = 2
EXIT_HYPOTHESIS = 3
EXIT_CONVERGENCE = 4

ROUTE_ALIASES = {"a": "yosida", "b": "timestep", "yosida": "yosida", "timestep": "timestep"}


def main(argv: list[str] | None = None) -> int:
    """Main program."""
    args = parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "run":
        return run_scenario(
            args.scenario,
            out=args.out,
            routes=args.routes,
            checks=args.check,
            tol=args.tol,
            seed=args.seed,
        )
    return run_suite(
        seed=args.seed,
        grid_refine=args.grid_refine,
        workers=args.workers,
        out=args.out,
        quick=args.quick,
    )


def _output_root() -> Path:
    return Path(os.environ.get("EVOLIN_OUT", "evolin-out"))


@attrs.frozen(eq=False)
class _RunContext:
    """Everything the checks of one run may need."""

    spec: ScenarioSpec = attrs.field()
    problem: Problem = attrs.field()
    report: SolveReport = attrs.field()
    rng: np.random.Generator = attrs.field()
    scenario: MaxwellScenario | None = attrs.field(default=None)

    @property
    def perturbation_time(self) -> float:
        if self.spec.perturbation_time is not None:
            return self.spec.perturbation_time
        grid = self.problem.grid
        return grid.t0 + 0.5 * (grid.t1 - grid.t0)


def _check_causality(context: _RunContext) -> list[CheckReport]:
    problem = context.problem
    a = context.perturbation_time
    values = context.rng.normal(size=problem.f.values.shape)
    values[: problem.grid.count_until(a)] = 0.0
    perturbation = problem.f.with_values(values)
    return [causality_test(problem, a, perturbation, context.report.route, context.spec.tol)]


def _check_rho_independence(context: _RunContext) -> list[CheckReport]:
    problem = context.problem.with_f(compact_support(context.problem.f))
    rho2 = context.spec.rho + 2.0 if context.spec.rho2 is None else context.spec.rho2
    return [rho_independence_test(problem, rho2, context.report.route, context.spec.tol)]


def _check_regularity(context: _RunContext) -> list[CheckReport]:
    return [regularity_test(context.problem, tol=context.spec.tol)]


def _check_yosida_bounds(context: _RunContext) -> list[CheckReport]:
    return [yosida_bounds_test(context.problem, tol=context.spec.tol)]


def _check_route_agreement(context: _RunContext) -> list[CheckReport]:
    report = context.report if context.report.route_agreement is not None else None
    return [route_agreement_test(context.problem, context.spec.tol, report)]


def _check_lipschitz(context: _RunContext) -> list[CheckReport]:
    return [
        lipschitz_test(
            context.problem, route=context.report.route, tol=context.spec.tol, rng=context.rng
        )
    ]


def _check_monotone_lambda(context: _RunContext) -> list[CheckReport]:
    return [monotone_lambda_test(context.report)]


def _check_negative_controls(context: _RunContext) -> list[CheckReport]:
    return negative_controls(context.problem, context.perturbation_time, context.rng)


def _check_saturation(context: _RunContext) -> list[CheckReport]:
    if context.scenario is None:
        raise ContractError("The saturation check needs a maxwell scenario")
    amplitudes = context.spec.amplitudes or [context.scenario.source.amplitude]
    study = saturation_study(context.scenario, amplitudes, context.spec.tol)
    error = study.linearization_error
    passed = study.on_graph and (error is None or error <= 0.02)
    return [
        CheckReport(
            "saturation",
            passed,
            np.nan if error is None else error,
            0.02,
            {"study": study},
        )
    ]


CHECK_FUNCTIONS = {
    "causality": _check_causality,
    "rho_independence": _check_rho_independence,
    "regularity": _check_regularity,
    "yosida_bounds": _check_yosida_bounds,
    "route_agreement": _check_route_agreement,
    "lipschitz": _check_lipschitz,
    "monotone_lambda": _check_monotone_lambda,
    "negative_controls": _check_negative_controls,
    "saturation": _check_saturation,
}


def _run_checks(context: _RunContext) -> list[CheckReport]:
    reports = []
    for name in context.spec.checks:
        print(f"Checking {name}")
        reports.extend(Task(name, CHECK_FUNCTIONS[name], {"context": context})())
    return reports


def _solve(spec: ScenarioSpec) -> tuple[Problem, SolveReport, MaxwellScenario | None, dict]:
    """Solve an inclusion or a Maxwell scenario, also return extra report sections."""
    if spec.kind == "inclusion":
        problem = spec.problem()
        return problem, solve(problem, spec.tol, routes=spec.routes), None, {}
    scenario = spec.maxwell_scenario()
    operators = build_operators(scenario.grid)
    result = run(scenario, spec.tol, routes=spec.routes, operators=operators)
    extra = {
        "maxwell": {
            "grid": scenario.grid,
            "Z": scenario.Z.describe(),
            "c": scenario.c,
            "source": scenario.source,
            "diagnostics": result.diagnostics,
            "edge_harmonic_dim": operators.edge_projector.dim,
            "cell_harmonic_dim": operators.cell_projector.dim,
        },
        "fields": {"E": result.E, "B": result.B},
    }
    return result.problem, result.report, scenario, extra


def _column_names(spec: ScenarioSpec, dim: int) -> list[str] | None:
    if spec.kind != "maxwell":
        return None
    edges = spec.maxwell.nx * (spec.maxwell.ny - 1) + (spec.maxwell.nx - 1) * spec.maxwell.ny
    return [f"Et{i}" for i in range(edges)] + [f"H{i}" for i in range(dim - edges)]


def _write_outputs(out: Path, spec: ScenarioSpec, report: SolveReport | None, data: dict):
    out.mkdir(parents=True, exist_ok=True)
    if report is not None:
        path = out / "solution.csv"
        print(f"Writing {path}")
        write_solution(path, report.u, _column_names(spec, report.u.dim))
        path = out / "convergence.csv"
        print(f"Writing {path}")
        write_convergence(path, report.per_lambda)
    for name, field in data.pop("fields", {}).items():
        path = out / f"{name}.csv"
        print(f"Writing {path}")
        write_solution(path, field)
    path = out / "report.json"
    print(f"Writing {path}")
    write_json(path, {"solve": report, **data})


def run_scenario(
    path: str | Path,
    out: str | Path | None = None,
    routes: str | None = None,
    checks: list[str] | None = None,
    tol: float | None = None,
    seed: int | None = None,
) -> int:
    """Load, solve and check one scenario file; return the exit status."""
    path = Path(path)
    try:
        spec = load_scenario(path).with_overrides(
            routes=None if routes is None else ROUTE_ALIASES.get(routes, routes),
            checks=checks,
            tol=tol,
            seed=seed,
        )
    except (ContractError, OSError) as exc:
        print(f"Invalid scenario {path}: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    out = _output_root() / path.stem if out is None else Path(out)
    data = {
        "scenario": spec.name,
        "kind": spec.kind,
        "routes": spec.routes,
        "tol": spec.tol,
        "seed": spec.seed,
    }
    try:
        problem, report, scenario, extra = _solve(spec)
    except ContractError as exc:
        print(f"Invalid scenario {path}: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except HypothesisViolation as exc:
        print(f"Hypothesis violation: {exc}", file=sys.stderr)
        _write_outputs(out, spec, None, {**data, "error": str(exc), "status": EXIT_HYPOTHESIS})
        return EXIT_HYPOTHESIS
    except ConvergenceError as exc:
        print(f"No convergence: {exc}", file=sys.stderr)
        partial = exc.report if isinstance(exc.report, SolveReport) else None
        failure = {"error": str(exc), "residual": exc.residual, "status": EXIT_CONVERGENCE}
        _write_outputs(out, spec, partial, {**data, **failure})
        return EXIT_CONVERGENCE
    except StructuralError as exc:
        print(f"Structure violated: {exc}", file=sys.stderr)
        _write_outputs(out, spec, None, {**data, "error": str(exc), "status": EXIT_CHECKS})
        return EXIT_CHECKS
    context = _RunContext(spec, problem, report, np.random.default_rng(spec.seed), scenario)
    reports = _run_checks(context)
    passed = all(check.passed for check in reports)
    status = EXIT_OK if passed else EXIT_CHECKS
    _write_outputs(
        out, spec, report, {**data, **extra, "checks": reports, "passed": passed, "status": status}
    )
    for check in reports:
        if not check.passed:
            print(f"Check {check.name} failed: {check.achieved:.3e} > {check.threshold:.3e}")
    return status


def run_suite(
    seed: int = 0,
    grid_refine: int = 2,
    workers: int | None = None,
    out: str | Path | None = None,
    quick: bool = False,
) -> int:
    """Run the property suite, print the constants table and write suite.json."""
    if grid_refine < 1:
        print("The grid refinement must be at least 1", file=sys.stderr)
        return EXIT_SCHEMA
    settings = SuiteSettings.quick(grid_refine) if quick else SuiteSettings(grid_refine=grid_refine)
    tasks = build_suite(seed, settings)
    runner = SerialRunner() if workers == 1 else ConcurrentRunner(max_workers=workers)
    results = runner.collect(tasks)
    print(constants_table(results))
    passed = all(report.passed for reports in results.values() for report in reports)
    out = _output_root() / "suite" if out is None else Path(out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "suite.json"
    print(f"Writing {path}")
    write_json(
        path,
        {
            "seed": seed,
            "grid_refine": grid_refine,
            "quick": quick,
            "settings": settings,
            "results": results,
            "passed": passed,
        },
    )
    return EXIT_OK if passed else EXIT_CHECKS


def _check_list(value: str) -> list[str]:
    names = [name.strip() for name in value.split(",") if name.strip()]
    unknown = sorted(set(names) - set(CHECKS))
    if unknown:
        raise argparse.ArgumentTypeError(
            f"unknown checks {', '.join(unknown)}; choose from {', '.join(CHECKS)}"
        )
    return names


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    """Parse command-line arguments."""
    parser = argparse.ArgumentParser(
        prog="evolin",
        description="Solve evolutionary inclusions and verify their structural properties.",
    )
    parser.add_argument(
        "-v", "--verbose", default=False, action="store_true", help="Log iterations."
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    run_parser = subparsers.add_parser("run", help="Solve one scenario file.")
    run_parser.add_argument("scenario", help="The scenario JSON file.")
    run_parser.add_argument(
        "--out", default=None, help="Output directory. [default=$EVOLIN_OUT/<stem>]"
    )
    run_parser.add_argument(
        "--routes",
        choices=["a", "b", "both", "yosida", "timestep"],
        default=None,
        help="a = yosida, b = timestep. Overrides the scenario.",
    )
    run_parser.add_argument(
        "--check",
        type=_check_list,
        default=None,
        help=f"Comma-separated checks from {', '.join(CHECKS)}.",
    )
    run_parser.add_argument("--tol", type=float, default=None, help="Solver tolerance.")
    run_parser.add_argument("--seed", type=int, default=None, help="Random seed for the checks.")

    suite_parser = subparsers.add_parser("suite", help="Run the full property suite.")
    suite_parser.add_argument(
        "--grid-refine",
        type=int,
        default=2,
        help="Refinement factor of the ODE convergence study. [default=%(default)s]",
    )
    suite_parser.add_argument("--seed", type=int, default=0, help="[default=%(default)s]")
    suite_parser.add_argument(
        "--workers", type=int, default=None, help="Number of threads, 1 runs serially."
    )
    suite_parser.add_argument(
        "--out", default=None, help="Output directory. [default=$EVOLIN_OUT/suite]"
    )
    suite_parser.add_argument(
        "--quick", default=False, action="store_true", help="Coarse grids for a smoke test."
    )
    return parser.parse_args(argv)


if __name__ == "__main__":
    sys.exit(main())
