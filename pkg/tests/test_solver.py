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
"""Unit tests for evolin.solver."""

import numpy as np
import pytest

from evolin.errors import (
    ContractError,
    HypothesisViolation,
    NonContractionError,
    StructuralError,
)
from evolin.fixtures import (
    convolution_memory,
    ode_linear,
    ode_linear_exact,
    sign_step,
    two_component,
    violating,
)
from evolin.material import MaterialLaw, MultiplierOperator
from evolin.monotone import LiftedRelation, LinearGraph, SoftGraph, sign_graph
from evolin.solver import (
    Problem,
    contraction_delta,
    law_norms,
    lipschitz_audit,
    solve,
    solve_aux_yosida,
    solve_linear_shifted,
)
from evolin.weighted_time import WeightedSignal, resolvent_time, weighted_norm


def small_ode():
    return ode_linear(h=0.05, window=(-1.0, 3.0))


def test_problem_dimension(grid, weight):
    law = MaterialLaw(MultiplierOperator.constant(1.0, 2), MultiplierOperator.zero(2))
    with pytest.raises(ContractError):
        Problem(law, LiftedRelation(sign_graph()), WeightedSignal.zeros(grid, weight, 1))


def test_solve_linear_shifted():
    problem = small_ode()
    u = solve_linear_shifted(problem.law, 2.0, problem.f)
    expected = resolvent_time(0.5, problem.f * 0.5)
    np.testing.assert_allclose(u.values, expected.values, atol=1e-13)
    plain = solve_linear_shifted(problem.law, 2.0, problem.f, "plain")
    np.testing.assert_allclose(plain.values, u.values, atol=1e-13)


def test_solve_linear_shifted_invalid():
    problem = small_ode()
    with pytest.raises(ContractError):
        solve_linear_shifted(problem.law, 0.0, problem.f)
    with pytest.raises(ContractError):
        solve_linear_shifted(problem.law, 1.0, problem.f, "other")


def test_aux_causal_exact():
    problem = small_ode()
    delta = contraction_delta(0.5, 0.0, 0.0)
    assert delta == pytest.approx(3.0)
    aux = solve_aux_yosida(problem, delta, 0.5, method="causal")
    # The Yosida approximation of linear(1) is linear(1 / (1 + lam)).
    shift = delta + 1 / 1.5
    expected = resolvent_time(1 / shift, problem.f * (1 / shift))
    np.testing.assert_allclose(aux.u.values, expected.values, atol=1e-12)
    assert aux.residual <= 1e-10
    assert aux.iterations == 1


def test_aux_picard_matches_causal():
    problem = small_ode()
    delta = contraction_delta(0.5, 0.0, 0.0)
    picard = solve_aux_yosida(problem, delta, 0.5, method="picard")
    causal = solve_aux_yosida(problem, delta, 0.5, method="causal")
    assert picard.method == "picard"
    assert picard.iterations > 1
    np.testing.assert_allclose(picard.u.values, causal.u.values, atol=1e-6)
    auto = solve_aux_yosida(problem, delta, 0.5)
    assert auto.method == "picard"
    with pytest.raises(ContractError):
        solve_aux_yosida(problem, delta, 0.5, method="newton")


def test_aux_picard_not_contracting():
    problem = small_ode()
    stiff = Problem(problem.law, LiftedRelation(LinearGraph(50.0)), problem.f)
    with pytest.raises(NonContractionError) as excinfo:
        solve_aux_yosida(stiff, 0.1, 0.01, method="picard")
    advised = excinfo.value.advised_delta
    assert advised == pytest.approx(contraction_delta(0.01, 0.0, 0.0))
    assert "delta=101" in str(excinfo.value)
    aux = solve_aux_yosida(stiff, advised, 0.01, method="picard")
    assert aux.residual <= 1e-4


def test_law_norms():
    norms = law_norms(two_component())
    assert norms["M"] == pytest.approx(1.2)
    assert norms["N"] == pytest.approx(0.3)
    assert norms["Mprime"] == 0.0


def test_timestep_ode_error():
    problem = ode_linear(h=0.02, window=(-1.0, 4.0))
    report = solve(problem, routes="timestep")
    assert report.route == "timestep"
    error = np.abs(report.u.values - ode_linear_exact(problem).values).max()
    assert error <= 2 * problem.grid.h
    assert report.residuals["timestep"] <= 1e-10


def test_error_decreases_with_h():
    errors = []
    for h in (0.04, 0.02):
        problem = ode_linear(h=h, window=(-1.0, 4.0))
        u = solve(problem, routes="timestep").u
        errors.append(np.abs(u.values - ode_linear_exact(problem).values).max())
    assert errors[1] < 0.6 * errors[0]


def test_sign_step_vanishes():
    report = solve(sign_step(), routes="timestep")
    assert np.abs(report.u.values).max() == 0.0


def test_routes_agree():
    problem = small_ode()
    report = solve(problem, routes="both")
    assert report.converged
    assert set(report.solutions) == {"yosida", "timestep"}
    assert report.route == "timestep"
    assert report.route_agreement <= 5e-8 * max(1.0, weighted_norm(problem.f))
    assert report.lambda_schedule[0] == 1.0
    assert len(report.per_lambda) == len(report.lambda_schedule)
    assert report.bounds["maxmonaux"] > 0
    assert report.bounds["regularity"] > 0


def test_yosida_route_only():
    problem = sign_step(h=0.05)
    report = solve(problem, routes="yosida", diagnostics=False)
    assert report.route == "yosida"
    assert report.route_agreement is None
    assert report.per_lambda[0].aux_method == "skipped"
    assert np.abs(report.u.values).max() <= 1e-7


def test_convolution_timestep():
    report = solve(convolution_memory(h=0.05), routes="timestep")
    assert report.residuals["timestep"] <= 1e-10
    assert np.abs(report.u.values).max() < 1.0


def test_zero_rhs():
    problem = small_ode()
    report = solve(problem.with_f(problem.f * 0.0))
    assert (report.u.values == 0).all()
    assert report.route_agreement == 0.0


def test_hypothesis_violation():
    with pytest.raises(HypothesisViolation, match="Positivity constant"):
        solve(violating(), routes="timestep")


def test_precondition_errors():
    with pytest.raises(ContractError):
        solve(ode_linear(rho=0.05, window=(-1.0, 2.0)), routes="timestep")
    problem = small_ode()
    shifted = Problem(problem.law, LiftedRelation(SoftGraph([(1.0, 1.0, 2.0)])), problem.f)
    with pytest.raises(ContractError, match="does not contain"):
        solve(shifted, routes="timestep")
    with pytest.raises(ContractError):
        solve(problem, routes="implicit")


def test_nonpositive_step_matrix():
    problem = small_ode()
    law = MaterialLaw(MultiplierOperator.constant(-1.0, 1), MultiplierOperator.zero(1))
    backwards = Problem(law, LiftedRelation(LinearGraph(1.0)), problem.f)
    with pytest.raises(StructuralError):
        solve(backwards, routes="timestep", c_est=1.0)


def test_lipschitz_audit():
    problem = sign_step(h=0.05)
    wave = problem.f.with_values(np.sin(problem.grid.times))
    report = lipschitz_audit(problem, problem.f * 3.0 + wave * 0.5)
    assert report.passed
    assert 0 < report.ratio <= report.bound
    assert lipschitz_audit(problem, problem.f).ratio == 0.0
