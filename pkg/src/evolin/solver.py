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
"""Solvers for ``(D M + N + A) u ∋ f`` on a discrete weighted time line.

Two routes produce the solution:

- ``"timestep"`` advances one grid step at a time and solves the per-step inclusion
  ``(C_M / h + C_N) u_k + A(u_k) ∋ r_k`` exactly, where ``C_M`` and ``C_N`` are the
  instantaneous coefficients of M and N and ``r_k`` collects the history.
- ``"yosida"`` replaces A by its Yosida approximation A_lam for lam = 2^-k, solves each
  regularized problem through the shifted auxiliary operator
  ``D M - M' + delta + A_lam`` and the fixed-point identity
  ``u = S_aux(f + (delta - M' - N) u)``, and passes to the limit lam -> 0 with
  Richardson extrapolation.

Both routes are causal: the value at step k only depends on the data up to step k.
"""

import logging

import attrs
import numpy as np
from numpy.typing import NDArray

from .errors import ContractError, ConvergenceError, HypothesisViolation, NonContractionError
from .material import MaterialLaw, Stencil, delta_policy, operator_norm, positivity_constant
from .monotone import Relation, inclusion_residual, relation_components, solve_pointwise, yosida
from .weighted_time import (
    TimeGrid,
    Weight,
    WeightedSignal,
    check_compatible,
    derivative,
    sobolev_norm,
    weighted_norm,
)

__all__ = (
    "AuxSolution",
    "LambdaEntry",
    "LipschitzReport",
    "Problem",
    "SolveReport",
    "law_norms",
    "lipschitz_audit",
    "maxmonaux_bound",
    "contraction_delta",
    "regularity_bound",
    "solve",
    "solve_aux_yosida",
    "solve_linear_shifted",
)


logger = logging.getLogger(__name__)

ROUTES = ("yosida", "timestep")


@attrs.frozen(eq=False)
class Problem:
    """The data of one evolutionary inclusion."""

    law: MaterialLaw = attrs.field()
    relation: Relation = attrs.field()
    f: WeightedSignal = attrs.field()

    def __attrs_post_init__(self):
        if self.f.dim != self.law.dim:
            raise ContractError(
                f"Right-hand side has dimension {self.f.dim}, law has {self.law.dim}"
            )
        relation_components(self.relation, self.law.dim)

    @property
    def grid(self) -> TimeGrid:
        return self.f.grid

    @property
    def weight(self) -> Weight:
        return self.f.weight

    def with_f(self, f: WeightedSignal) -> "Problem":
        return Problem(self.law, self.relation, f)

    def with_weight(self, weight: Weight) -> "Problem":
        return Problem(self.law, self.relation, self.f.with_weight(weight))


def _mul(coefficient: NDArray, vector: NDArray) -> NDArray:
    return coefficient * vector if coefficient.ndim == 1 else coefficient @ vector


def _as_full(coefficient: NDArray) -> NDArray:
    return np.diag(coefficient) if coefficient.ndim == 1 else coefficient


def _combine(*terms: tuple[float, NDArray]) -> NDArray:
    """Linear combination of step coefficients, kept diagonal when possible."""
    if all(c.ndim == 1 for _, c in terms):
        return sum(w * c for w, c in terms)
    return sum(w * _as_full(c) for w, c in terms)


@attrs.define
class _History:
    """Running state of a causal sweep: past values and the past values of M u."""

    stencils: dict[str, Stencil]
    values: NDArray
    m_values: NDArray

    def m_part(self, k: int, h: float) -> NDArray:
        """History part of ``D(M u)_k``."""
        previous = self.m_values[k - 1] if k > 0 else 0.0
        return (self.stencils["M"].history(self.values, k) - previous) / h

    def commit(self, k: int, u_k: NDArray):
        self.values[k] = u_k
        stencil = self.stencils["M"]
        self.m_values[k] = _mul(stencil.coefficient(k), u_k) + stencil.history(self.values, k)


def _start(problem: Problem) -> _History:
    shape = problem.f.values.shape
    return _History(problem.law.stencils(problem.grid), np.zeros(shape), np.zeros(shape))


def solve_linear_shifted(
    law: MaterialLaw, delta: float, g: WeightedSignal, variant: str = "aux"
) -> WeightedSignal:
    """Solve ``D(M u) - M' u + delta u = g`` (variant "aux") or ``D(M u) + delta u = g``.

    The causal system is solved by forward substitution over the time steps.
    """
    if variant not in ("aux", "plain"):
        raise ContractError(f"Unknown variant '{variant}', use 'aux' or 'plain'")
    if not delta > 0:
        raise ContractError(f"The shift delta must be positive, got {delta}")
    grid = g.grid
    history = _History(law.stencils(grid), np.zeros_like(g.values), np.zeros_like(g.values))
    h = grid.h
    mprime = history.stencils["Mprime"]
    for k in range(grid.n):
        coefficient = history.stencils["M"].coefficient(k) / h
        rhs = g.values[k] - history.m_part(k, h)
        if variant == "aux":
            coefficient = _combine((1.0, coefficient), (-1.0, mprime.coefficient(k)))
            rhs = rhs + mprime.history(history.values, k)
        if coefficient.ndim == 1:
            coefficient = coefficient + delta
            if (coefficient <= 0).any():
                raise ContractError(f"Shifted step matrix is not positive at step {k}")
            u_k = rhs / coefficient
        else:
            coefficient = coefficient + delta * np.eye(len(rhs))
            try:
                u_k = np.linalg.solve(coefficient, rhs)
            except np.linalg.LinAlgError as exc:
                raise ContractError(f"Shifted step matrix is singular at step {k}") from exc
        history.commit(k, u_k)
    return g.with_values(history.values)


def _aux_operator(
    law: MaterialLaw, delta: float, lam: float, relation: Relation, u: WeightedSignal
) -> WeightedSignal:
    """Evaluate ``D(M u) - M' u + delta u + A_lam(u)``."""
    m_u = u.with_values(law.stencils(u.grid)["M"].apply(u.values))
    mprime_u = u.with_values(law.operator("Mprime").stencil(u.grid).apply(u.values))
    return derivative(m_u) - mprime_u + delta * u + yosida(relation, lam, u)


@attrs.frozen
class AuxSolution:
    """Solution of the shifted auxiliary problem for one Yosida parameter."""

    u: WeightedSignal = attrs.field()
    delta: float = attrs.field()
    lam: float = attrs.field()
    method: str = attrs.field()
    iterations: int = attrs.field()
    residual: float = attrs.field()
    yosida_norm: float = attrs.field()
    h1_norm: float = attrs.field()


def contraction_delta(lam: float, norm_mprime: float, norm_n: float) -> float:
    """A shift for which the global Picard iteration contracts for every law."""
    return 1 / lam + norm_mprime + norm_n + 1


def law_norms(problem: Problem) -> dict[str, float]:
    """Norms of M, N and Mprime, maximized over the weights rho0 and rho of the problem."""
    weights = [Weight(problem.law.rho0), problem.weight]
    return {
        which: operator_norm(problem.law, which, weights, problem.grid).value
        for which in ("M", "N", "Mprime")
    }


def solve_aux_yosida(
    problem: Problem,
    delta: float,
    lam: float,
    g: WeightedSignal | None = None,
    tol: float = 1e-8,
    method: str = "auto",
    c_est: float | None = None,
    max_iter: int = 10_000,
    norms: dict[str, float] | None = None,
) -> AuxSolution:
    """Solve ``(D M - M' + delta + A_lam) u = g`` with ``g = f`` by default.

    Parameters
    ----------
    problem
        The inclusion whose law and relation define the operator.
    delta
        Shift parameter, should exceed ``|M'| + |N|``.
    lam
        Yosida parameter.
    g
        Right-hand side, ``problem.f`` when omitted.
    tol
        Relative tolerance on successive Picard iterates in the weighted norm.
    method
        ``"picard"`` iterates ``u <- solve_linear_shifted(g - A_lam(u))`` from zero.
        ``"causal"`` solves the same equation step by step with the pointwise kernel.
        ``"auto"`` picks Picard when its contraction estimate is below one.
    c_est
        Positivity constant used for the contraction estimate (computed if omitted).
    norms
        Norms of M, N and Mprime keyed by name (computed if omitted).

    Returns
    -------
    solution
        The solution with iteration count and diagnostic norms.
    """
    g = problem.f if g is None else g
    check_compatible(problem.f, g)
    if method not in ("auto", "picard", "causal"):
        raise ContractError(f"Unknown method '{method}'")
    if method == "auto":
        norms = law_norms(problem) if norms is None else norms
        if c_est is None:
            c_est = positivity_constant(problem.law, problem.weight, problem.grid).c_est
        margin = c_est + delta - norms["Mprime"] - norms["N"]
        method = "picard" if margin > 0 and 1 / (lam * margin) < 0.9 else "causal"
    if method == "picard":
        norms = law_norms(problem) if norms is None else norms
        advised = contraction_delta(lam, norms["Mprime"], norms["N"])
        u, iterations = _picard_aux(problem, delta, lam, g, tol, max_iter, advised)
    else:
        u = _causal_aux(problem, delta, lam, g)
        iterations = 1
    defect = _aux_operator(problem.law, delta, lam, problem.relation, u) - g
    return AuxSolution(
        u=u,
        delta=delta,
        lam=lam,
        method=method,
        iterations=iterations,
        residual=weighted_norm(defect),
        yosida_norm=weighted_norm(yosida(problem.relation, lam, u)),
        h1_norm=sobolev_norm(u, 1),
    )


def _picard_aux(problem, delta, lam, g, tol, max_iter, advised) -> tuple[WeightedSignal, int]:
    u = g * 0.0
    scale = 1 + weighted_norm(g)
    previous = np.inf
    increases = 0
    for iteration in range(1, max_iter + 1):
        u_new = solve_linear_shifted(problem.law, delta, g - yosida(problem.relation, lam, u))
        change = weighted_norm(u_new - u)
        u = u_new
        if change <= tol * scale:
            return u, iteration
        increases = increases + 1 if change > previous else 0
        if increases >= 3:
            raise NonContractionError(
                f"Picard iteration for lambda={lam:g} does not contract with delta={delta:g}; "
                f"use delta > 1/lambda + |N| + |M'|, e.g. delta={advised:g}",
                residual=change,
                advised_delta=advised,
            )
        previous = change
    raise ConvergenceError(f"Picard iteration for lambda={lam:g} did not converge", residual=change)


def _causal_aux(problem: Problem, delta: float, lam: float, g: WeightedSignal) -> WeightedSignal:
    history = _start(problem)
    h = problem.grid.h
    mprime = history.stencils["Mprime"]
    for k in range(problem.grid.n):
        matrix = _combine(
            (1 / h, history.stencils["M"].coefficient(k)),
            (-1.0, mprime.coefficient(k)),
            (delta, np.ones(problem.law.dim)),
        )
        rhs = g.values[k] - history.m_part(k, h) + mprime.history(history.values, k)
        history.commit(k, solve_pointwise(problem.relation, matrix, rhs, lam))
    return g.with_values(history.values)


@attrs.frozen
class LambdaEntry:
    """Diagnostics of the Yosida route for one value of lambda."""

    lam: float = attrs.field()
    picard_iters: int = attrs.field()
    aux_method: str = attrs.field()
    residual: float = attrs.field()
    yosida_norm: float = attrs.field()
    h1_norm: float = attrs.field()
    outer_iters: int = attrs.field()
    theta: float = attrs.field()
    cauchy: float | None = attrs.field(default=None)
    extrapolated_cauchy: float | None = attrs.field(default=None)


@attrs.frozen(eq=False)
class SolveReport:
    """Solution and convergence evidence of :func:`solve`."""

    u: WeightedSignal = attrs.field()
    route: str = attrs.field()
    c_est: float = attrs.field()
    delta: float | None = attrs.field(default=None)
    lambda_schedule: list[float] = attrs.field(factory=list)
    per_lambda: list[LambdaEntry] = attrs.field(factory=list)
    residual_final: float = attrs.field(default=0.0)
    residuals: dict[str, float] = attrs.field(factory=dict)
    solutions: dict[str, WeightedSignal] = attrs.field(factory=dict)
    route_agreement: float | None = attrs.field(default=None)
    bounds: dict[str, float] = attrs.field(factory=dict)
    converged: bool = attrs.field(default=True)


def _timestep(problem: Problem) -> tuple[WeightedSignal, float]:
    """Causal sweep with the exact per-step resolvent; returns the plug-back residual."""
    history = _start(problem)
    h = problem.grid.h
    stencil_n = history.stencils["N"]
    residual = 0.0
    for k in range(problem.grid.n):
        matrix = _combine(
            (1 / h, history.stencils["M"].coefficient(k)), (1.0, stencil_n.coefficient(k))
        )
        rhs = problem.f.values[k] - history.m_part(k, h) - stencil_n.history(history.values, k)
        u_k = solve_pointwise(problem.relation, matrix, rhs)
        residual = max(residual, inclusion_residual(problem.relation, matrix, u_k, rhs))
        history.commit(k, u_k)
    return problem.f.with_values(history.values), residual


def _shifted_sweep(
    problem: Problem,
    delta: float,
    lam: float,
    warm: NDArray | None,
    max_outer: int,
) -> tuple[WeightedSignal, int, float]:
    """Regularized solution through ``u = S_aux(f + (delta - M' - N) u)``, step by step.

    At every step, the damped iteration ``u <- (1 - theta) u + theta S_aux(...)`` starts
    with theta = 1 and halves theta whenever the update grows.
    """
    history = _start(problem)
    h = problem.grid.h
    dim = problem.law.dim
    stencils = history.stencils
    most_outer = 0
    smallest_theta = 1.0
    for k in range(problem.grid.n):
        c_m = stencils["M"].coefficient(k)
        c_mp = stencils["Mprime"].coefficient(k)
        c_n = stencils["N"].coefficient(k)
        aux_matrix = _combine((1 / h, c_m), (-1.0, c_mp), (delta, np.ones(dim)))
        shift = _combine((delta, np.ones(dim)), (-1.0, c_mp), (-1.0, c_n))
        base = problem.f.values[k] - history.m_part(k, h) - stencils["N"].history(history.values, k)
        if warm is not None:
            u_k = warm[k].copy()
        else:
            u_k = history.values[k - 1].copy() if k > 0 else np.zeros(dim)
        scale = 1 + np.abs(base).max()
        theta = 1.0
        previous = np.inf
        for outer in range(1, max_outer + 1):
            target = solve_pointwise(problem.relation, aux_matrix, base + _mul(shift, u_k), lam)
            change = np.abs(target - u_k).max()
            if change > previous:
                theta = max(theta / 2, 1 / 64)
            u_k = u_k + theta * (target - u_k)
            previous = change
            if change <= 1e-11 * scale:
                break
        else:
            raise ConvergenceError(
                f"Outer shift iteration did not converge at step {k} for lambda={lam:g}",
                residual=float(change),
            )
        most_outer = max(most_outer, outer)
        smallest_theta = min(smallest_theta, theta)
        history.commit(k, u_k)
    return problem.f.with_values(history.values), most_outer, smallest_theta


def maxmonaux_bound(
    f: WeightedSignal, c_est: float, norm_m: float, delta: float, h: float
) -> float:
    """Upper bound for ``|A_lam(u_lam)|`` of the auxiliary problem, with discrete slack."""
    rho = f.weight.rho
    slack = 1 + 5 * h * (1 + delta)
    coefficient = norm_m + delta * (1 / rho + 2 * h)
    return weighted_norm(f) + coefficient * sobolev_norm(f, 1) * slack / c_est


def regularity_bound(f: WeightedSignal, c_est: float, delta: float, h: float) -> float:
    """Upper bound for ``|u_lam|_{rho,1}`` of the auxiliary problem, with discrete slack."""
    return (1 + 5 * h * (1 + delta)) * sobolev_norm(f, 1) / c_est


def _scaled_diff(a: WeightedSignal, b: WeightedSignal) -> tuple[float, float]:
    diff = a - b
    return weighted_norm(diff), float(np.abs(diff.values).max())


def solve(
    problem: Problem,
    tol: float = 1e-8,
    routes: str | tuple[str, ...] = "both",
    levels: int = 14,
    max_outer: int = 60,
    c_est: float | None = None,
    diagnostics: bool = True,
) -> SolveReport:
    """Solve the inclusion with one or both routes.

    Parameters
    ----------
    problem
        The inclusion to solve.
    tol
        Tolerance for the lambda limit of the Yosida route.
    routes
        ``"yosida"``, ``"timestep"``, ``"both"`` or a tuple of route names.
    levels
        The Yosida route uses lam = 2^-k for k = 0 .. levels.
    max_outer
        Iteration cap of the damped outer shift iteration per step.
    c_est
        Positivity constant, estimated with :func:`positivity_constant` when omitted.
    diagnostics
        When true, the auxiliary problem is solved for each lam to record the bounds.

    Returns
    -------
    report
        The timestep solution is the primary ``u`` when that route ran.
    """
    routes = ROUTES if routes == "both" else ((routes,) if isinstance(routes, str) else routes)
    for route in routes:
        if route not in ROUTES:
            raise ContractError(f"Unknown route '{route}', use yosida, timestep or both")
    if problem.weight.rho < problem.law.rho0:
        raise ContractError(
            f"The law is evolutionary for rho >= {problem.law.rho0}, got rho={problem.weight.rho}"
        )
    if not problem.relation.contains_origin():
        raise ContractError("The relation does not contain (0, 0)")
    if c_est is None:
        c_est = positivity_constant(problem.law, problem.weight, problem.grid).c_est
    if c_est <= 0:
        raise HypothesisViolation(
            f"Positivity constant c_est = {c_est:.4g} <= 0: "
            "the law (D M + N) is not uniformly positive"
        )
    if weighted_norm(problem.f) == 0:
        zero = problem.f * 0.0
        return SolveReport(
            u=zero,
            route=routes[-1],
            c_est=c_est,
            solutions={route: zero for route in routes},
            residuals={route: 0.0 for route in routes},
            route_agreement=0.0 if len(routes) == 2 else None,
        )

    solutions, residuals = {}, {}
    report_kwargs = {}
    if "yosida" in routes:
        report_kwargs = _yosida_route(problem, tol, levels, max_outer, c_est, diagnostics)
        solutions["yosida"] = report_kwargs.pop("u")
        residuals["yosida"] = report_kwargs["residual_final"]
    if "timestep" in routes:
        solutions["timestep"], residuals["timestep"] = _timestep(problem)
        logger.info("Timestep route plug-back residual %.3e", residuals["timestep"])
    route = "timestep" if "timestep" in solutions else "yosida"
    agreement = None
    if len(solutions) == 2:
        agreement = weighted_norm(solutions["yosida"] - solutions["timestep"])
    report_kwargs["residual_final"] = residuals[route]
    report = SolveReport(
        u=solutions[route],
        route=route,
        c_est=c_est,
        solutions=solutions,
        residuals=residuals,
        route_agreement=agreement,
        **report_kwargs,
    )
    if not report.converged:
        raise ConvergenceError(
            "Lambda schedule exhausted without Cauchy behavior; |A_lam(u_lam)| trace: "
            + ", ".join(f"{entry.yosida_norm:.3e}" for entry in report.per_lambda),
            residual=residuals["yosida"],
            report=report,
        )
    return report


def _richardson(table: list[list[WeightedSignal]], u_new: WeightedSignal, depth: int = 3):
    """Extend the extrapolation table for lambdas halving at each level."""
    row = [u_new]
    previous = table[-1] if table else []
    for j in range(1, min(depth, len(previous)) + 1):
        factor = 1 / (2**j - 1)
        row.append(row[j - 1] + (row[j - 1] - previous[j - 1]) * factor)
    table.append(row)
    return row[-1]


def _yosida_route(problem, tol, levels, max_outer, c_est, diagnostics) -> dict:
    norms = law_norms(problem)
    delta = delta_policy(norms["Mprime"], norms["N"])
    f = problem.f
    h = problem.grid.h
    threshold = tol * max(1.0, weighted_norm(f))
    max_threshold = tol * max(1.0, float(np.abs(f.values).max()))
    bounds = {
        "maxmonaux": maxmonaux_bound(f, c_est, norms["M"], delta, h),
        "regularity": regularity_bound(f, c_est, delta, h),
    }
    schedule, entries, table = [], [], []
    previous_raw = previous_best = None
    warm = None
    converged = False
    best = residual = None
    for level in range(levels + 1):
        lam = 2.0**-level
        u_lam, outer, theta = _shifted_sweep(problem, delta, lam, warm, max_outer)
        warm = u_lam.values
        best = _richardson(table, u_lam)
        schedule.append(lam)
        cauchy = extrapolated = None
        if previous_raw is not None:
            cauchy = weighted_norm(u_lam - previous_raw)
            extrapolated, extrapolated_max = _scaled_diff(best, previous_best)
        if diagnostics:
            aux = solve_aux_yosida(problem, delta, lam, tol=tol, c_est=c_est, norms=norms)
            aux_fields = (aux.iterations, aux.method, aux.residual, aux.yosida_norm, aux.h1_norm)
        else:
            aux_fields = (0, "skipped", 0.0, 0.0, 0.0)
        entries.append(LambdaEntry(lam, *aux_fields, outer, theta, cauchy, extrapolated))
        logger.debug("lambda=%g cauchy=%s extrapolated=%s", lam, cauchy, extrapolated)
        previous_raw, previous_best = u_lam, best
        if extrapolated is not None and level >= 3:
            residual = extrapolated
            if extrapolated <= threshold and extrapolated_max <= max_threshold:
                converged = True
                break
    return {
        "u": best,
        "delta": delta,
        "lambda_schedule": schedule,
        "per_lambda": entries,
        "residual_final": float(residual if residual is not None else np.inf),
        "bounds": bounds,
        "converged": converged,
    }


@attrs.frozen
class LipschitzReport:
    """Achieved ratio ``|S(f) - S(g)| / |f - g|`` against the bound ``(1 + eps_h) / c_est``."""

    ratio: float = attrs.field()
    bound: float = attrs.field()
    passed: bool = attrs.field()


LIPSCHITZ_SLACK = 0.05


def lipschitz_audit(
    problem: Problem,
    g: WeightedSignal,
    tol: float = 1e-8,
    routes: str = "timestep",
    c_est: float | None = None,
) -> LipschitzReport:
    """Compare solutions for the right-hand sides ``problem.f`` and g.

    The bound ``(1 + eps_h) / c_est`` uses ``eps_h = 0.05``.
    """
    check_compatible(problem.f, g)
    if c_est is None:
        c_est = positivity_constant(problem.law, problem.weight, problem.grid).c_est
    bound = (1 + LIPSCHITZ_SLACK) / c_est
    distance = weighted_norm(problem.f - g)
    if distance == 0:
        return LipschitzReport(0.0, bound, True)
    u_f = solve(problem, tol, routes, c_est=c_est, diagnostics=False).u
    u_g = solve(problem.with_f(g), tol, routes, c_est=c_est, diagnostics=False).u
    ratio = weighted_norm(u_f - u_g) / distance
    return LipschitzReport(ratio, bound, bool(ratio <= bound))
