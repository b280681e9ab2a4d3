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
"""Unit tests for evolin.maxwell."""

import attrs
import numpy as np
import pytest

from evolin.errors import ContractError, HypothesisViolation, StructuralError
from evolin.fixtures import maxwell_linear, maxwell_saturation
from evolin.maxwell import (
    MaxwellScenario,
    SourceSpec,
    StaggeredGrid2D,
    assemble_block,
    build_operators,
    run,
    saturation_study,
    sigma_consistency,
    source_signal,
    steady_state_oracle,
    structure_residuals,
)
from evolin.monotone import sign_graph


def test_grid_counts():
    grid = StaggeredGrid2D(3, 4)
    assert (grid.n_ex, grid.n_ey, grid.n_edges) == (9, 8, 17)
    assert grid.n_cells == 12
    assert grid.n_nodes == 6
    assert grid.dx == pytest.approx(1 / 3)
    x, y = grid.cell_centers()
    assert x.shape == y.shape == (12,)


def test_grid_invalid():
    with pytest.raises(StructuralError):
        StaggeredGrid2D(1, 3)
    with pytest.raises(ContractError):
        StaggeredGrid2D(3, 3, dx=-1.0)


@pytest.mark.parametrize("n", [2, 4, 7])
def test_structure_residuals(n, rng):
    operators = build_operators(StaggeredGrid2D(n, n + 1))
    residuals = structure_residuals(operators, rng)
    assert residuals["adjointness"] <= 1e-13
    assert residuals["div_curl"] <= 1e-13
    assert residuals["projector"] <= 1e-12


@pytest.mark.parametrize("n", [3, 6])
def test_harmonic_dimensions(n):
    operators = build_operators(StaggeredGrid2D(n, n))
    assert operators.edge_projector.dim == 0
    assert operators.cell_projector.dim == 1
    assert not operators.edge_projector.ambiguous
    assert not operators.cell_projector.ambiguous
    constant = np.ones(operators.grid.n_cells)
    np.testing.assert_allclose(operators.cell_projector(constant), constant)


def test_curl_of_gradient():
    operators = build_operators(StaggeredGrid2D(5, 4))
    product = (operators.curl0 @ operators.grad0).toarray()
    assert np.abs(product).max() <= 1e-12 * np.abs(operators.curl0.toarray()).max() ** 2


def test_source_spec():
    with pytest.raises(ContractError):
        SourceSpec("spiral")
    with pytest.raises(ContractError):
        SourceSpec(profile="ramp")
    with pytest.raises(ContractError):
        SourceSpec(profile="table", times=(0.0,), values=(1.0,))
    t = np.array([-1.0, 0.0, 0.5, 1.0, 2.0])
    np.testing.assert_array_equal(SourceSpec(profile="step").time_profile(t), [0, 1, 1, 1, 1])
    pulse = SourceSpec(profile="pulse", start=0.0, stop=1.0)
    np.testing.assert_array_equal(pulse.time_profile(t), [0, 1, 1, 0, 0])
    table = SourceSpec(profile="table", times=(0.0, 1.0), values=(0.0, 2.0))
    np.testing.assert_allclose(table.time_profile(t), [0, 0, 1, 2, 2])


@pytest.mark.parametrize("pattern", ["uniform_x", "loop", "point"])
def test_source_signal(pattern):
    scenario = maxwell_linear(n=4, t1=1.0)
    scenario = scenario.with_source(SourceSpec(pattern, "step", 2.0))
    operators = build_operators(scenario.grid)
    current, removed = source_signal(scenario, operators)
    assert current.dim == scenario.grid.n_edges
    assert removed == pytest.approx(0.0, abs=1e-12)
    assert (current.values[scenario.time.times < 0] == 0).all()
    assert np.abs(current.values).max() == pytest.approx(2.0)


def test_assemble_block():
    scenario = maxwell_saturation(n=3, t1=1.0)
    problem = assemble_block(scenario)
    grid = scenario.grid
    assert problem.law.dim == grid.n_edges + grid.n_cells
    assert problem.relation.dim == problem.law.dim
    assert (problem.f.values[:, grid.n_edges :] == 0).all()
    skew = problem.relation.skew
    np.testing.assert_allclose(skew, -skew.T)


def test_assemble_block_requires_c_positive():
    with pytest.raises(ContractError):
        assemble_block(maxwell_linear(n=3, t1=1.0).with_Z(sign_graph()))


def test_assemble_block_positivity():
    scenario = attrs.evolve(maxwell_linear(n=3, t1=1.0), kappa=-5.0)
    with pytest.raises(HypothesisViolation):
        assemble_block(scenario)


def test_run_diagnostics():
    result = run(maxwell_saturation(n=4, t1=1.5))
    diagnostics = result.diagnostics
    scale = 1 + np.abs(result.J.values).max()
    assert diagnostics.div_drift <= 1e-10 * scale
    assert diagnostics.hn_component.max() <= 1e-10 * scale
    assert diagnostics.constitutive_distance <= 1e-8
    ledger = diagnostics.energy_ledger
    magnitude = 1 + max(np.abs(ledger[key]).max() for key in ("stored", "dissipation", "source"))
    assert np.abs(ledger["balance"]).max() <= 1e-8 * magnitude
    assert result.E.dim == result.J.dim
    assert result.B.dim == result.H.dim


def test_steady_state_oracle():
    scenario = maxwell_linear(n=4, h=0.1, t1=5.0)
    operators = build_operators(scenario.grid)
    result = run(scenario, operators=operators)
    oracle = steady_state_oracle(scenario, operators)
    assert np.abs(oracle).max() > 0
    assert np.abs(result.H.values[-1] - oracle).max() <= 1e-8 * (1 + np.abs(oracle).max())


def test_steady_state_oracle_refuses():
    with pytest.raises(ContractError):
        steady_state_oracle(maxwell_saturation(n=3))
    pulse = maxwell_linear(n=3).with_source(SourceSpec(profile="pulse", stop=1.0))
    with pytest.raises(ContractError):
        steady_state_oracle(pulse)
    point = maxwell_linear(n=3).with_source(SourceSpec("point"))
    with pytest.raises(ContractError):
        steady_state_oracle(point)


def conductivity(sigma, sigma_prime=None, t1=1.0, **media):
    reference = maxwell_linear(n=3, t1=t1)
    return MaxwellScenario(
        grid=StaggeredGrid2D(3, 3),
        time=reference.time,
        weight=reference.weight,
        Z=reference.Z,
        sigma=sigma,
        sigma_prime=sigma_prime,
        **media,
    )


def test_time_dependent_conductivity():
    scenario = conductivity("1 + 0.2*sin(t)", "0.2*cos(t)")
    assert 1.5 <= sigma_consistency(scenario) <= 2.5
    problem = assemble_block(scenario)
    rate = problem.law.stencils(scenario.time)["Mprime"].table
    np.testing.assert_allclose(rate[:, 0], 0.2 * np.cos(scenario.time.times))
    assert (rate[:, scenario.grid.n_edges :] == 0).all()
    result = run(scenario)
    assert result.problem.law.Mprime is not None
    assert result.diagnostics.div_drift <= 1e-10 * (1 + np.abs(result.J.values).max())


def test_time_dependent_conductivity_needs_rate():
    with pytest.raises(ContractError, match="sigma_prime"):
        conductivity("1 + 0.2*sin(t)")
    # Constants written as text stay constants.
    assert conductivity("2").sigma == 2.0


@pytest.mark.parametrize(
    ("sigma", "sigma_prime"),
    [("1 + 0.2*sin(t)", "0.5*cos(t)"), ("1 + 0.2*sin(t)", "0"), ("1 + step(t - 1)", "0")],
)
def test_inconsistent_conductivity_rate(sigma, sigma_prime):
    scenario = conductivity(sigma, sigma_prime, t1=3.0)
    assert sigma_consistency(scenario) < 1.5
    with pytest.raises(ContractError, match="time derivative"):
        assemble_block(scenario)


def test_per_edge_media():
    grid = StaggeredGrid2D(3, 3)
    sigma = np.linspace(0.5, 2.0, grid.n_edges)
    kappa = np.where(np.arange(grid.n_edges) < grid.n_ex, 0.0, 0.3)
    scenario = conductivity(sigma, kappa=kappa)
    problem = assemble_block(scenario)
    stencils = problem.law.stencils(scenario.time)
    np.testing.assert_allclose(stencils["M"].table[3, : grid.n_edges], sigma)
    np.testing.assert_allclose(stencils["N"].table[3, : grid.n_edges], kappa)
    np.testing.assert_allclose(stencils["N"].table[3, grid.n_edges :], scenario.c)
    result = run(scenario)
    assert result.diagnostics.div_drift <= 1e-10 * (1 + np.abs(result.J.values).max())
    with pytest.raises(StructuralError):
        conductivity(sigma[:-1])


def test_pulse_energy_decays():
    scenario = maxwell_linear(n=3, t1=3.0).with_source(SourceSpec("uniform_x", "pulse", stop=1.0))
    result = run(scenario)
    ledger = result.diagnostics.energy_ledger
    times = scenario.time.times
    after = times > 1.0 + scenario.time.h / 2
    scale = 1 + np.abs(ledger["stored"]).max()
    assert ledger["stored"][~after].max() > 0
    assert (ledger["stored"][after] <= 1e-8 * scale).all()
    norms = np.linalg.norm(result.H.values[after], axis=1)
    assert (np.diff(norms) <= 1e-8 * scale).all()
    assert norms[-1] < norms[0]


def test_saturation_study():
    study = saturation_study(maxwell_saturation(n=4, t1=1.5), [0.01, 1.0])
    assert study.on_graph
    assert study.linearization_error <= 0.02
    assert study.linear_slope == pytest.approx(1.0)
    assert study.peak_B[1] > study.peak_B[0]
    assert len(study.curves) == 2
    assert set(study.curves[0]) == {"H", "B"}
