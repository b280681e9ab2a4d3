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
"""Executable structural checks for solvers: causality, independence of the weight,
regularity, the Yosida diagnostics bounds, and negative controls that must be detected.

Every check returns a :class:`CheckReport` with the achieved constant next to the
threshold it was compared with, so that drifting constants show up in reports even when
the check passes.
"""

import logging
from collections.abc import Callable

import attrs
import numpy as np
import scipy.sparse

from .errors import ContractError, UnsupportedError
from .material import delta_policy, positivity_constant
from .monotone import (
    CustomGraph,
    LiftedRelation,
    ScalarGraph,
    monotonicity_probe,
    newton_inclusion,
)
from .solver import (
    ROUTES,
    Problem,
    SolveReport,
    law_norms,
    lipschitz_audit,
    maxmonaux_bound,
    regularity_bound,
    solve,
    solve_aux_yosida,
)
from .weighted_time import Weight, WeightedSignal, weighted_norm

__all__ = (
    "CheckReport",
    "causality_test",
    "centered_difference_solve",
    "compact_support",
    "lipschitz_test",
    "monotone_lambda_test",
    "negative_controls",
    "nonmonotone_graph",
    "regularity_test",
    "rho_independence_test",
    "route_agreement_test",
    "yosida_bounds_test",
)


logger = logging.getLogger(__name__)

EXACT = 1e-12
SUPPORT_MARGIN = 10

Solver = Callable[[Problem], WeightedSignal]


@attrs.frozen
class CheckReport:
    name: str = attrs.field()
    passed: bool = attrs.field(converter=bool)
    achieved: float = attrs.field(converter=float)
    threshold: float = attrs.field(converter=float)
    details: dict = attrs.field(factory=dict)


def _route_solver(route: str, tol: float) -> Solver:
    if route not in ROUTES:
        raise ContractError(f"Unknown route '{route}', use yosida or timestep")

    def run(problem: Problem) -> WeightedSignal:
        return solve(problem, tol, routes=route, diagnostics=False).u

    return run


def _tier(route: str, tol: float) -> float:
    """Route B is exact up to roundoff, Route A up to its tolerance."""
    return EXACT if route == "timestep" else 10 * tol


def causality_test(
    problem: Problem,
    a: float,
    perturbation: WeightedSignal,
    route: str = "timestep",
    tol: float = 1e-8,
    solver: Solver | None = None,
    threshold: float | None = None,
) -> CheckReport:
    """Solve for f and f + perturbation and compare the outputs at samples ``t_k <= a``.

    The perturbation must vanish at those samples. A custom solver can be given to test
    other schemes, as done for the acausal negative control.
    """
    count = problem.grid.count_until(a)
    if np.abs(perturbation.values[:count]).max(initial=0.0) > 0:
        raise ContractError(f"The perturbation does not vanish up to t={a}")
    threshold = _tier(route, tol) if threshold is None else threshold
    solver = _route_solver(route, tol) if solver is None else solver
    u = solver(problem)
    v = solver(problem.with_f(problem.f + perturbation))
    difference = np.abs(u.values - v.values)
    scale = 1 + np.abs(u.values).max()
    before = difference[:count].max(initial=0.0) / scale
    after = difference[count:].max(initial=0.0) / scale
    return CheckReport(
        "causality",
        before <= threshold,
        before,
        threshold,
        {"a": a, "samples_before": count, "difference_after": float(after), "route": route},
    )


def compact_support(f: WeightedSignal, margin: int = SUPPORT_MARGIN) -> WeightedSignal:
    """Zero the first and last ``margin`` samples of f."""
    values = f.values.copy()
    values[:margin] = 0.0
    values[len(values) - margin :] = 0.0
    return f.with_values(values)


def _support_margins(f: WeightedSignal) -> tuple[int, int]:
    active = np.flatnonzero(np.abs(f.values).max(axis=1) > 0)
    if len(active) == 0:
        return f.grid.n, f.grid.n
    return int(active[0]), int(f.grid.n - 1 - active[-1])


def rho_independence_test(
    problem: Problem, rho2: Weight | float, route: str = "timestep", tol: float = 1e-8
) -> CheckReport:
    """Solve the same data at two weights and compare the trajectories in the max-norm."""
    rho2 = rho2 if isinstance(rho2, Weight) else Weight(rho2)
    threshold = _tier(route, tol)
    details = {"rho": problem.weight.rho, "rho2": rho2.rho, "route": route}
    start, end = _support_margins(problem.f)
    failures = []
    if min(start, end) < SUPPORT_MARGIN:
        failures.append(
            f"data must vanish on {SUPPORT_MARGIN} samples at both window ends "
            f"(found {start} and {end})"
        )
    if problem.law.rho0 > min(problem.weight.rho, rho2.rho):
        failures.append(f"law is evolutionary only for rho >= {problem.law.rho0}")
    if not isinstance(problem.relation, (ScalarGraph, LiftedRelation)):
        failures.append("relation must be the lifting of a scalar graph")
    if failures:
        details["precondition"] = failures
        return CheckReport("rho_independence", False, np.inf, threshold, details)
    solver = _route_solver(route, tol)
    u = solver(problem)
    v = solver(problem.with_weight(rho2))
    achieved = np.abs(u.values - v.values).max() / (1 + np.abs(u.values).max())
    return CheckReport("rho_independence", achieved <= threshold, achieved, threshold, details)


def _ratio(value: float, bound: float) -> float:
    if bound > 0:
        return value / bound
    return 0.0 if value == 0 else np.inf


def regularity_test(
    problem: Problem,
    delta: float | None = None,
    lambdas: tuple[float, ...] = (1.0, 0.25, 0.0625),
    tol: float = 1e-8,
) -> CheckReport:
    """Check ``|u_lam|_{rho,1} <= (1 + 5 h (1 + delta)) |f|_{rho,1} / c_est`` for each lam."""
    c_est = positivity_constant(problem.law, problem.weight, problem.grid).c_est
    norms = law_norms(problem)
    delta = delta_policy(norms["Mprime"], norms["N"]) if delta is None else delta
    bound = regularity_bound(problem.f, c_est, delta, problem.grid.h)
    ratios = []
    for lam in lambdas:
        aux = solve_aux_yosida(problem, delta, lam, tol=tol, c_est=c_est, norms=norms)
        ratios.append(_ratio(aux.h1_norm, bound))
    achieved = max(ratios)
    return CheckReport(
        "regularity",
        achieved <= 1,
        achieved,
        1.0,
        {"lambdas": list(lambdas), "ratios": ratios, "bound": bound, "delta": delta},
    )


def yosida_bounds_test(problem: Problem, levels: int = 14, tol: float = 1e-8) -> CheckReport:
    """Check the maxmonaux and regularity bounds of the auxiliary problem for lam = 2^-k."""
    c_est = positivity_constant(problem.law, problem.weight, problem.grid).c_est
    norms = law_norms(problem)
    delta = delta_policy(norms["Mprime"], norms["N"])
    h = problem.grid.h
    yosida_bound = maxmonaux_bound(problem.f, c_est, norms["M"], delta, h)
    h1_bound = regularity_bound(problem.f, c_est, delta, h)
    yosida_ratios, h1_ratios = [], []
    for level in range(levels + 1):
        aux = solve_aux_yosida(problem, delta, 2.0**-level, tol=tol, c_est=c_est, norms=norms)
        yosida_ratios.append(_ratio(aux.yosida_norm, yosida_bound))
        h1_ratios.append(_ratio(aux.h1_norm, h1_bound))
    achieved = max(yosida_ratios + h1_ratios)
    return CheckReport(
        "yosida_bounds",
        achieved <= 1,
        achieved,
        1.0,
        {
            "maxmonaux_bound": yosida_bound,
            "regularity_bound": h1_bound,
            "yosida_ratios": yosida_ratios,
            "h1_ratios": h1_ratios,
        },
    )


def route_agreement_test(
    problem: Problem, tol: float = 1e-8, report: SolveReport | None = None
) -> CheckReport:
    """Compare the two routes in the weighted norm against ``5 tol max(1, |f|_rho)``."""
    report = solve(problem, tol, routes="both") if report is None else report
    if report.route_agreement is None:
        raise ContractError("Route agreement needs a report computed with both routes")
    threshold = 5 * tol * max(1.0, weighted_norm(problem.f))
    return CheckReport(
        "route_agreement",
        report.route_agreement <= threshold,
        report.route_agreement,
        threshold,
        {"residuals": dict(report.residuals)},
    )


def _random_rhs(problem: Problem, rng: np.random.Generator) -> WeightedSignal:
    values = rng.normal(size=problem.f.values.shape)
    values = np.cumsum(values, axis=0) * np.sqrt(problem.grid.h)
    return problem.f.with_values(values)


def lipschitz_test(
    problem: Problem,
    pairs: int = 100,
    route: str = "timestep",
    tol: float = 1e-8,
    rng: np.random.Generator | None = None,
) -> CheckReport:
    """Largest ``|S(f) - S(g)| / |f - g|`` over random pairs against ``1.05 / c_est``."""
    rng = np.random.default_rng(0) if rng is None else rng
    c_est = positivity_constant(problem.law, problem.weight, problem.grid).c_est
    ratios = []
    bound = np.inf
    for _ in range(pairs):
        first = problem.with_f(_random_rhs(problem, rng))
        audit = lipschitz_audit(first, _random_rhs(problem, rng), tol, route, c_est=c_est)
        ratios.append(audit.ratio)
        bound = audit.bound
    achieved = max(ratios, default=0.0)
    return CheckReport(
        "lipschitz", achieved <= bound, achieved, bound, {"pairs": pairs, "c_est": c_est}
    )


def monotone_lambda_test(report: SolveReport, tail: int = 3, slack: float = 1.05) -> CheckReport:
    """Check that the last raw Cauchy differences ``|u_{lam_{k+1}} - u_{lam_k}|`` decrease."""
    cauchy = [entry.cauchy for entry in report.per_lambda if entry.cauchy is not None]
    if len(cauchy) < 2:
        return CheckReport("monotone_lambda", True, 0.0, slack, {"cauchy": cauchy})
    last = cauchy[-(tail + 1) :]
    growth = max(_ratio(b, a) for a, b in zip(last[:-1], last[1:]))
    return CheckReport("monotone_lambda", growth <= slack, growth, slack, {"cauchy": cauchy})


def _operator_matrix(stencil, n: int):
    """The causal operator of a stencil as a sparse (n dim, n dim) matrix."""
    if stencil.kind == "multiplier":
        if stencil.diagonal:
            return scipy.sparse.diags(stencil.table.ravel())
        return scipy.sparse.block_diag(list(stencil.table))
    blocks = [
        scipy.sparse.kron(
            scipy.sparse.eye(n, n, -lag),
            scipy.sparse.diags(block) if stencil.diagonal else scipy.sparse.csr_array(block),
        )
        for lag, block in enumerate(stencil.table[:n])
    ]
    return sum(blocks[1:], blocks[0])


def centered_difference_solve(problem: Problem) -> WeightedSignal:
    """Solve ``D_c(M u) + N u + A(u) ∋ f`` with the centered difference D_c.

    The centered difference couples every sample to its successor, so this scheme is
    not causal. It exists as a negative control for :func:`causality_test`. The whole
    trajectory is solved at once with a dense Newton iteration.
    """
    if not isinstance(problem.relation, (ScalarGraph, LiftedRelation)):
        raise UnsupportedError("The centered difference scheme needs a componentwise relation")
    grid = problem.grid
    n, dim = grid.n, problem.law.dim
    stencils = problem.law.stencils(grid)
    offsets = np.full(n - 1, 1 / (2 * grid.h))
    centered = scipy.sparse.diags([-offsets, offsets], [-1, 1]).tolil()
    centered[n - 1, n - 2] = -1 / grid.h
    centered[n - 1, n - 1] = 1 / grid.h
    difference = scipy.sparse.kron(centered.tocsr(), scipy.sparse.identity(dim))
    system = difference @ _operator_matrix(stencils["M"], n) + _operator_matrix(stencils["N"], n)
    relation = problem.relation
    if isinstance(relation, ScalarGraph):
        relation = LiftedRelation(relation)
    values = newton_inclusion(relation, system.toarray(), problem.f.values.ravel(), mu=grid.h)
    return problem.f.with_values(values.reshape(n, dim))


def _nonmonotone_resolvent(lam, z):
    return z / (1 - lam)


def nonmonotone_graph() -> CustomGraph:
    """The graph of ``-identity``, whose resolvent ``z / (1 - lam)`` is not nonexpansive."""
    return CustomGraph(_nonmonotone_resolvent, "negative identity")


def negative_controls(
    problem: Problem, a: float | None = None, rng: np.random.Generator | None = None
) -> list[CheckReport]:
    """Run the controls that must be flagged: an acausal scheme and a non-monotone graph.

    A control report passes when the underlying check fails.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    grid = problem.grid
    a = grid.t0 + 0.5 * (grid.t1 - grid.t0) if a is None else a
    bump = np.zeros_like(problem.f.values)
    bump[grid.count_until(a) :] = 100 * (1 + np.abs(problem.f.values).max())
    acausal = causality_test(
        problem, a, problem.f.with_values(bump), solver=centered_difference_solve
    )
    probe = monotonicity_probe(nonmonotone_graph(), rng=rng)
    return [
        CheckReport(
            "negative_control_acausal",
            not acausal.passed,
            acausal.achieved,
            acausal.threshold,
            {"flagged": not acausal.passed},
        ),
        CheckReport(
            "negative_control_nonmonotone",
            not probe.passed,
            probe.min_pairing,
            0.0,
            {"flagged": not probe.passed, "witness": probe.witness},
        ),
    ]
