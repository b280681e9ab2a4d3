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
"""Unit tests for evolin.scenario."""

import json
from pathlib import Path

import numpy as np
import pytest

from evolin.errors import ContractError, StructuralError
from evolin.material import ConvolutionOperator, MultiplierOperator
from evolin.monotone import LinearGraph, SoftGraph
from evolin.scenario import (
    CHECKS,
    OperatorSpec,
    RelationSpec,
    TimeSpec,
    load_scenario,
    structure_scenario,
)

SCENARIOS = Path(__file__).parent.parent / "demos" / "scenarios"


def inclusion_data(**changes):
    data = {
        "kind": "inclusion",
        "time": {"t0": -1.0, "t1": 2.0, "h": 0.1},
        "law": {"M": {"diagonal": ["1"]}, "N": {"diagonal": ["0"]}},
        "relation": {"kind": "linear", "alpha": 1.0},
        "f": ["step(t)"],
    }
    data.update(changes)
    return data


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.json")), ids=lambda p: p.stem)
def test_load_demo(path):
    spec = load_scenario(path)
    assert spec.name == path.stem
    assert set(spec.checks) <= set(CHECKS)
    if spec.kind == "inclusion":
        problem = spec.problem()
        assert problem.f.dim == problem.law.dim
    else:
        scenario = spec.maxwell_scenario()
        assert scenario.c > 0


def test_structure_defaults():
    spec = structure_scenario(inclusion_data())
    assert spec.routes == "both"
    assert spec.tol == 1e-8
    assert spec.checks == []
    assert spec.name is None
    problem = spec.problem()
    assert problem.grid.n == 31
    assert isinstance(problem.relation.scalar, LinearGraph)


def test_numbers_as_expressions():
    spec = structure_scenario(inclusion_data(f=[2]))
    assert spec.f == ["2"]
    assert (spec.problem().f.values == 2).all()


def test_extra_key():
    with pytest.raises(ContractError, match="bogus"):
        structure_scenario(inclusion_data(bogus=1))


def test_wrong_type():
    data = inclusion_data(time={"t0": -1.0, "t1": 2.0, "h": "abc"})
    with pytest.raises(ContractError, match=r"\$\.time\.h"):
        structure_scenario(data)


@pytest.mark.parametrize(
    "changes",
    [
        {"kind": "pde"},
        {"law": None},
        {"routes": "euler"},
        {"checks": ["causality", "energy"]},
        {"f": [True]},
    ],
)
def test_invalid_scenario(changes):
    with pytest.raises(ContractError):
        structure_scenario(inclusion_data(**changes))


def test_maxwell_needs_section():
    data = {"kind": "maxwell", "time": {"t0": 0.0, "t1": 1.0, "h": 0.1}}
    with pytest.raises(ContractError):
        structure_scenario(data)


def test_kind_mismatch():
    spec = structure_scenario(inclusion_data())
    with pytest.raises(ContractError):
        spec.maxwell_scenario()


def test_with_overrides():
    spec = structure_scenario(inclusion_data(routes="yosida"))
    changed = spec.with_overrides(routes="timestep", tol=None, seed=7)
    assert changed.routes == "timestep"
    assert changed.tol == spec.tol
    assert changed.seed == 7


def test_load_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{\"kind\": ")
    with pytest.raises(ContractError, match="not valid JSON"):
        load_scenario(path)


def test_load_keeps_name(tmp_path):
    path = tmp_path / "file.json"
    path.write_text(json.dumps(inclusion_data(name="custom")))
    assert load_scenario(path).name == "custom"


def test_time_spec():
    assert TimeSpec(0.0, 1.0, 0.25).build().n == 5
    with pytest.raises(ContractError):
        TimeSpec(1.0, 0.0, 0.1).build()


def test_operator_spec():
    assert isinstance(OperatorSpec(diagonal=["1", "2"]).build("M"), MultiplierOperator)
    full = OperatorSpec(matrix=[["1", "0.1"], ["0.1", "1"]]).build("M")
    assert not full.diagonal
    kernel = OperatorSpec("convolution", kernel=["exp(-t)"], support=2.0).build("N")
    assert isinstance(kernel, ConvolutionOperator)
    table = OperatorSpec("convolution", table=[[1.0], [0.5]], lag_step=0.1).build("N")
    assert table.support == pytest.approx(0.1)
    with pytest.raises(ContractError):
        OperatorSpec().build("M")
    with pytest.raises(ContractError):
        OperatorSpec(diagonal=["1"], matrix=[["1"]]).build("M")
    with pytest.raises(ContractError):
        OperatorSpec("convolution", kernel=["1"]).build("N")
    with pytest.raises(ContractError):
        OperatorSpec("integral").build("N")


@pytest.mark.parametrize(
    ("spec", "origin_slope"),
    [
        (RelationSpec("linear", alpha=2.0), 2.0),
        (RelationSpec("sign"), 0.0),
        (RelationSpec("saturation", mu0=1.0, knee=0.5, mu_sat=0.2), 0.2),
        (RelationSpec("soft", breakpoints=[[0.0, -1.0, 1.0]], left_slope=1.0), 0.0),
    ],
)
def test_relation_spec(spec, origin_slope):
    graph = spec.build()
    assert graph.contains_origin()
    assert graph.min_slope == pytest.approx(origin_slope)


def test_relation_spec_invalid():
    with pytest.raises(ContractError):
        RelationSpec("cubic").build()
    assert isinstance(RelationSpec("soft", breakpoints=[[0, 0, 0]]).build(), SoftGraph)


def maxwell_data(**media):
    return {
        "kind": "maxwell",
        "time": {"t0": 0.0, "t1": 1.0, "h": 0.1},
        "maxwell": {"nx": 2, "ny": 2, "Z": {"kind": "linear", "alpha": 1.0}, **media},
    }


def test_maxwell_media():
    scenario = structure_scenario(maxwell_data()).maxwell_scenario()
    assert scenario.sigma == 1.0
    assert scenario.sigma_prime is None
    spec = structure_scenario(
        maxwell_data(sigma="1 + 0.2*sin(t)", sigma_prime="0.2*cos(t)", kappa_edges=[0, 0, 1, 1])
    )
    scenario = spec.maxwell_scenario()
    assert scenario.sigma(np.zeros(1))[0] == pytest.approx(1.0)
    assert scenario.sigma_prime(np.zeros(1))[0] == pytest.approx(0.2)
    np.testing.assert_array_equal(scenario.kappa, [0.0, 0.0, 1.0, 1.0])
    scenario = structure_scenario(maxwell_data(sigma_edges=[1, 2, 3, 4])).maxwell_scenario()
    np.testing.assert_array_equal(scenario.sigma, [1.0, 2.0, 3.0, 4.0])


def test_maxwell_media_invalid():
    with pytest.raises(ContractError, match="sigma_prime"):
        structure_scenario(maxwell_data(sigma="1 + 0.2*sin(t)")).maxwell_scenario()
    with pytest.raises(StructuralError, match="one value per edge"):
        structure_scenario(maxwell_data(sigma_edges=[1.0, 2.0])).maxwell_scenario()
