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
"""The property suite: checks on shipped fixtures, bundled as independent tasks.

Each :class:`Task` returns a list of :class:`~evolin.harness.CheckReport` objects and
never raises: an unexpected exception becomes a failed report, so that one broken
check cannot hide the others. All randomness comes from one seed, split over the tasks
with :class:`numpy.random.SeedSequence` in the order in which they are built.
"""

import inspect
import logging
from collections.abc import Callable

import attrs
import numpy as np

from .errors import HypothesisViolation
from .fixtures import (
    FIXTURES,
    MULTIPLIER_FIXTURES,
    maxwell_linear,
    maxwell_saturation,
    ode_linear,
    ode_linear_exact,
    sign_step,
    violating,
)
from .harness import (
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
from .material import positivity_constant
from .maxwell import (
    StaggeredGrid2D,
    build_operators,
    run,
    saturation_study,
    steady_state_oracle,
    structure_residuals,
)
from .monotone import LinearGraph, ScalarGraph, saturation_graph, sign_graph, yosida
from .solver import ROUTES, solve
from .weighted_time import weighted_norm

__all__ = ("SuiteSettings", "Task", "build_suite", "constants_table")


logger = logging.getLogger(__name__)


@attrs.frozen
class Task:
    """A named check function with its keyword arguments."""

    name: str = attrs.field()
    func: Callable[..., list[CheckReport]] = attrs.field()
    kwargs: dict = attrs.field(factory=dict)

    def describe(self) -> str:
        return f"{self.name} ({self.func.__name__})"

    def __call__(self) -> list[CheckReport]:
        try:
            return self.func(**self.kwargs)
        except (ValueError, RuntimeError, NotImplementedError, ArithmeticError) as exc:
            logger.exception("Task %s failed", self.name)
            error = f"{type(exc).__name__}: {exc}"
            return [CheckReport(self.name, False, np.inf, 0.0, {"error": error})]


@attrs.frozen
class SuiteSettings:
    """Sizes of the suite; :meth:`quick` gives coarse ones for smoke tests."""

    h: float = attrs.field(default=2e-2)
    ode_h: float = attrs.field(default=1e-2)
    ode_window: tuple[float, float] = attrs.field(default=(-1.0, 8.0))
    grid_refine: int = attrs.field(default=2)
    tol: float = attrs.field(default=1e-8)
    levels: int = attrs.field(default=14)
    routes: tuple[str, ...] = attrs.field(default=ROUTES)
    lipschitz_pairs: int = attrs.field(default=100)
    resolvent_samples: int = attrs.field(default=10_000)
    oracle_samples: int = attrs.field(default=200)
    maxwell_sizes: tuple[int, ...] = attrs.field(default=(8, 16))
    maxwell_n: int = attrs.field(default=8)
    maxwell_h: float = attrs.field(default=0.1)
    amplitudes: tuple[float, ...] = attrs.field(default=(0.01, 0.5, 2.0))

    @classmethod
    def quick(cls, grid_refine: int = 2) -> "SuiteSettings":
        return cls(
            h=0.1,
            ode_h=0.05,
            ode_window=(-1.0, 4.0),
            grid_refine=grid_refine,
            levels=6,
            routes=("timestep",),
            lipschitz_pairs=5,
            resolvent_samples=1000,
            oracle_samples=20,
            maxwell_sizes=(4,),
            maxwell_n=4,
            amplitudes=(0.01, 1.0),
        )


def _bounded(name: str, achieved: float, threshold: float, details: dict) -> CheckReport:
    return CheckReport(name, achieved <= threshold, achieved, threshold, details)


RESOLVENT_GRAPHS = {
    "linear": LinearGraph(1.0),
    "sign": sign_graph(),
    "saturation": saturation_graph(1.0, 0.5, 0.2),
}


def _brute_force_resolvent(graph: ScalarGraph, lam: float, z: float, resolution=1e-6) -> float:
    """Grid search for the u whose pair ``(u, (z - u) / lam)`` lies closest to the graph.

    The resolvent is nonexpansive and maps 0 to 0, so the search covers ``[-|z|, |z|]``,
    first with steps of 1e-3 and then with ``resolution`` around the coarse minimum.
    """
    radius = abs(z)
    coarse = np.linspace(-radius, radius, int(2 * radius / 1e-3) + 3)
    best = coarse[np.argmin(graph.graph_distance(coarse, (z - coarse) / lam))]
    fine = np.arange(best - 2e-3, best + 2e-3 + resolution, resolution)
    return float(fine[np.argmin(graph.graph_distance(fine, (z - fine) / lam))])


def resolvent_checks(
    samples: int = 10_000, oracle_samples: int = 200, rng: np.random.Generator | None = None
) -> list[CheckReport]:
    """Nonexpansiveness, the 1/lam bound of the Yosida approximation and a brute-force
    oracle for the resolvents of the linear, sign and saturation graphs."""
    rng = np.random.default_rng(0) if rng is None else rng
    reports = []
    for name, graph in RESOLVENT_GRAPHS.items():
        lam = np.exp(rng.uniform(np.log(1e-2), np.log(1e2), samples))
        z1 = rng.normal(scale=3.0, size=samples)
        z2 = rng.normal(scale=3.0, size=samples)
        gap = np.abs(z1 - z2)
        expansion = np.abs(graph.resolve(lam, z1) - graph.resolve(lam, z2)) - gap
        lipschitz = np.abs(yosida(graph, lam, z1) - yosida(graph, lam, z2)) - gap / lam
        details = {"graph": name, "samples": samples}
        reports.append(_bounded("nonexpansive", expansion.max(), 1e-12, details))
        reports.append(_bounded("yosida_lipschitz", lipschitz.max(), 1e-12, details))
        lam = rng.uniform(0.1, 10.0, oracle_samples)
        z = rng.normal(scale=3.0, size=oracle_samples)
        oracle = np.array([_brute_force_resolvent(graph, *pair) for pair in zip(lam, z)])
        error = float(np.abs(graph.resolve(lam, z) - oracle).max(initial=0.0))
        reports.append(
            _bounded("resolvent_oracle", error, 1e-5, {**details, "samples": oracle_samples})
        )
    return reports


def ode_benchmark(
    h: float = 1e-2,
    refine: int = 2,
    window: tuple[float, float] = (-1.0, 8.0),
    routes: tuple[str, ...] = ROUTES,
    tol: float = 1e-8,
) -> list[CheckReport]:
    """``u' + u = step`` against ``1 - exp(-t)``: error at most 2h and first order."""
    steps = (h, h / refine) if refine > 1 else (h,)
    reports = []
    for route in routes:
        errors = []
        for step in steps:
            problem = ode_linear(step, window=window)
            u = solve(problem, tol, routes=route, diagnostics=False).u
            errors.append(weighted_norm(u - ode_linear_exact(problem)))
            reports.append(
                CheckReport(
                    "ode_error", errors[-1] <= 2 * step, errors[-1], 2 * step, {"route": route}
                )
            )
        if len(errors) == 2:
            order = float(np.log(errors[0] / errors[1]) / np.log(refine))
            reports.append(
                CheckReport(
                    "ode_order", order >= 0.9, order, 0.9, {"route": route, "minimum": True}
                )
            )
    return reports


def positivity_check(fixture: str, h: float = 2e-2) -> list[CheckReport]:
    problem = FIXTURES[fixture](h)
    estimate = positivity_constant(problem.law, problem.weight, problem.grid)
    return [
        CheckReport(
            "c_est",
            estimate.c_est > 0,
            estimate.c_est,
            0.0,
            {"fixture": fixture, "sampled": estimate.sampled, "certified": estimate.certified},
        )
    ]


def causality_checks(
    fixture: str,
    h: float = 2e-2,
    routes: tuple[str, ...] = ROUTES,
    tol: float = 1e-8,
    rng: np.random.Generator | None = None,
) -> list[CheckReport]:
    """Perturb the data after the middle of the window, compare before it, and make
    sure the acausal centered scheme is flagged on the same fixture."""
    rng = np.random.default_rng(0) if rng is None else rng
    problem = FIXTURES[fixture](h)
    grid = problem.grid
    a = grid.t0 + 0.5 * (grid.t1 - grid.t0)
    values = rng.normal(size=problem.f.values.shape)
    values[: grid.count_until(a)] = 0.0
    perturbation = problem.f.with_values(values)
    reports = [causality_test(problem, a, perturbation, route, tol) for route in routes]
    reports.append(negative_controls(problem, a, rng)[0])
    return reports


def rho_independence_checks(
    fixture: str,
    h: float = 2e-2,
    rhos: tuple[float, float] = (1.0, 3.0),
    routes: tuple[str, ...] = ROUTES,
    tol: float = 1e-8,
) -> list[CheckReport]:
    problem = FIXTURES[fixture](h, rho=rhos[0])
    problem = problem.with_f(compact_support(problem.f))
    return [rho_independence_test(problem, rhos[1], route, tol) for route in routes]


def yosida_checks(
    fixture: str, h: float = 2e-2, levels: int = 14, tol: float = 1e-8
) -> list[CheckReport]:
    problem = FIXTURES[fixture](h)
    return [yosida_bounds_test(problem, levels, tol), regularity_test(problem, tol=tol)]


def route_agreement_checks(fixture: str, h: float = 2e-2, tol: float = 1e-8) -> list[CheckReport]:
    problem = FIXTURES[fixture](h)
    report = solve(problem, tol, routes="both")
    return [route_agreement_test(problem, tol, report), monotone_lambda_test(report)]


def lipschitz_check(
    h: float = 2e-2, pairs: int = 100, tol: float = 1e-8, rng: np.random.Generator | None = None
) -> list[CheckReport]:
    return [lipschitz_test(sign_step(h), pairs, "timestep", tol, rng)]


def maxwell_structure_checks(n: int, rng: np.random.Generator | None = None) -> list[CheckReport]:
    """Exact identities of the stencils and the dimensions of the harmonic fields."""
    operators = build_operators(StaggeredGrid2D(n, n))
    residuals = structure_residuals(operators, rng)
    details = {"n": n}
    reports = [
        _bounded("adjointness", residuals["adjointness"], 1e-13, details),
        _bounded("div_curl", residuals["div_curl"], 1e-13, details),
        _bounded("projector", residuals["projector"], 1e-12, details),
    ]
    edge, cell = operators.edge_projector, operators.cell_projector
    mismatch = abs(edge.dim) + abs(cell.dim - 1)
    reports.append(
        CheckReport(
            "harmonic_dims",
            mismatch == 0 and not (edge.ambiguous or cell.ambiguous),
            mismatch,
            0.0,
            {**details, "edge": edge.dim, "cell": cell.dim, "gaps": [edge.gap, cell.gap]},
        )
    )
    return reports


def maxwell_run_checks(
    n: int = 8, h: float = 0.1, t1: float = 3.0, tol: float = 1e-8
) -> list[CheckReport]:
    """Continuity of the current, the constitutive relation and the energy balance."""
    result = run(maxwell_saturation(n, h, t1), tol)
    diagnostics = result.diagnostics
    scale = 1 + np.abs(result.J.values).max()
    ledger = diagnostics.energy_ledger
    magnitude = 1 + max(
        np.abs(ledger[key]).max(initial=0.0) for key in ("stored", "dissipation", "source")
    )
    balance = float(np.abs(ledger["balance"]).max(initial=0.0) / magnitude)
    details = {"n": n}
    return [
        _bounded("div_drift", diagnostics.div_drift, 1e-10 * scale, details),
        _bounded("constitutive_distance", diagnostics.constitutive_distance, 1e-8, details),
        _bounded("energy_balance", balance, 1e-8, details),
    ]


def maxwell_oracle_check(
    n: int = 8, h: float = 0.1, t1: float = 5.0, tol: float = 1e-8
) -> list[CheckReport]:
    """Late-time H of linear media against the direct sparse steady-state solve."""
    scenario = maxwell_linear(n, h, t1)
    operators = build_operators(scenario.grid)
    result = run(scenario, tol, operators=operators)
    oracle = steady_state_oracle(scenario, operators)
    error = float(np.abs(result.H.values[-1] - oracle).max() / (1 + np.abs(oracle).max()))
    return [_bounded("steady_state_oracle", error, 1e-8, {"n": n})]


def maxwell_linearization_check(
    n: int = 8, h: float = 0.1, t1: float = 3.0, amplitudes=(0.01, 0.5, 2.0), tol: float = 1e-8
) -> list[CheckReport]:
    """Small amplitudes follow linear media within 2 %, and every run stays on the graph."""
    study = saturation_study(maxwell_saturation(n, h, t1), list(amplitudes), tol)
    details = {"n": n, "amplitudes": list(amplitudes)}
    return [
        _bounded("linearization", study.linearization_error, 0.02, details),
        _bounded("saturation_on_graph", max(study.graph_distance, default=0.0), 1e-8, details),
    ]


def negative_control_checks(
    h: float = 2e-2, rng: np.random.Generator | None = None
) -> list[CheckReport]:
    """The non-monotone graph must be detected and a law with c_est <= 0 refused."""
    reports = [negative_controls(sign_step(h), rng=rng)[1]]
    problem = violating(h)
    c_est = positivity_constant(problem.law, problem.weight, problem.grid).c_est
    try:
        solve(problem, routes="timestep", diagnostics=False)
    except HypothesisViolation as exc:
        refused, message = True, str(exc)
    else:
        refused, message = False, "solved without complaint"
    reports.append(
        CheckReport("negative_control_hypothesis", refused, c_est, 0.0, {"message": message})
    )
    return reports


def _specs(settings: SuiteSettings) -> list[tuple[str, Callable, dict]]:
    s = settings
    fixed = {"h": s.h, "tol": s.tol}
    specs = [
        (
            "resolvents",
            resolvent_checks,
            {"samples": s.resolvent_samples, "oracle_samples": s.oracle_samples},
        ),
        (
            "ode_benchmark",
            ode_benchmark,
            {
                "h": s.ode_h,
                "refine": s.grid_refine,
                "window": s.ode_window,
                "routes": s.routes,
                "tol": s.tol,
            },
        ),
        ("lipschitz", lipschitz_check, {**fixed, "pairs": s.lipschitz_pairs}),
    ]
    for fixture in FIXTURES:
        specs.append((f"positivity[{fixture}]", positivity_check, {"fixture": fixture, "h": s.h}))
        per_fixture = {**fixed, "fixture": fixture}
        causality = {**per_fixture, "routes": s.routes}
        specs.append((f"causality[{fixture}]", causality_checks, causality))
        specs.append((f"yosida[{fixture}]", yosida_checks, {**per_fixture, "levels": s.levels}))
    for fixture in MULTIPLIER_FIXTURES:
        independence = {**fixed, "fixture": fixture, "routes": s.routes}
        specs.append((f"rho_independence[{fixture}]", rho_independence_checks, independence))
        if "yosida" in s.routes:
            name = f"route_agreement[{fixture}]"
            specs.append((name, route_agreement_checks, {**fixed, "fixture": fixture}))
    for n in s.maxwell_sizes:
        specs.append((f"maxwell_structure[{n}]", maxwell_structure_checks, {"n": n}))
    maxwell = {"n": s.maxwell_n, "h": s.maxwell_h, "tol": s.tol}
    specs.append(("maxwell_run", maxwell_run_checks, maxwell))
    specs.append(("maxwell_oracle", maxwell_oracle_check, maxwell))
    linearization = {**maxwell, "amplitudes": s.amplitudes}
    specs.append(("maxwell_linearization", maxwell_linearization_check, linearization))
    specs.append(("negative_controls", negative_control_checks, {"h": s.h}))
    return specs


def build_suite(seed: int = 0, settings: SuiteSettings | None = None) -> list[Task]:
    """All tasks of the property suite, each with its own random stream."""
    specs = _specs(SuiteSettings() if settings is None else settings)
    children = np.random.SeedSequence(seed).spawn(len(specs))
    tasks = []
    for (name, func, kwargs), child in zip(specs, children):
        if "rng" in inspect.signature(func).parameters:
            kwargs = {**kwargs, "rng": np.random.default_rng(child)}
        tasks.append(Task(name, func, kwargs))
    return tasks


def constants_table(results: dict[str, list[CheckReport]]) -> str:
    """Plain-text table with one row per check: achieved constant, threshold, verdict."""
    rows = [("task", "check", "achieved", "threshold", "status")]
    for name, reports in results.items():
        for report in reports:
            status = "ok" if report.passed else "FAILED"
            rows.append(
                (name, report.name, f"{report.achieved:.3e}", f"{report.threshold:.3e}", status)
            )
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    return "\n".join(
        "  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip() for row in rows
    )
