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
"""Scenario files: JSON descriptions of inclusions and Maxwell simulations.

A scenario is structured with cattrs into the frozen specification classes below.
Unknown keys and ill-typed values are rejected with messages that name the JSON path.
Coefficients and right-hand sides are expressions in ``t``, see
:mod:`evolin.expressions`.

Example of a generic inclusion::

    {
        "kind": "inclusion",
        "time": {"t0": -1, "t1": 8, "h": 0.01},
        "rho": 1.0,
        "law": {"M": {"diagonal": ["1"]}, "N": {"diagonal": ["0"]}},
        "relation": {"kind": "linear", "alpha": 1.0},
        "f": ["step(t)"]
    }
"""

import json
from pathlib import Path

import attrs
import cattrs

from .errors import ContractError
from .expressions import ExpressionArray
from .material import ConvolutionOperator, MaterialLaw, MultiplierOperator, Operator
from .maxwell import MaxwellScenario, SourceSpec, StaggeredGrid2D
from .monotone import (
    LiftedRelation,
    LinearGraph,
    ScalarGraph,
    SoftGraph,
    saturation_graph,
    sign_graph,
)
from .solver import ROUTES, Problem
from .weighted_time import TimeGrid, Weight, WeightedSignal

__all__ = (
    "CHECKS",
    "LawSpec",
    "MaxwellSpec",
    "OperatorSpec",
    "RelationSpec",
    "ScenarioSpec",
    "TimeSpec",
    "load_scenario",
    "structure_scenario",
)


CHECKS = (
    "causality",
    "rho_independence",
    "regularity",
    "yosida_bounds",
    "route_agreement",
    "lipschitz",
    "monotone_lambda",
    "negative_controls",
    "saturation",
)


@attrs.frozen
class TimeSpec:
    t0: float = attrs.field()
    t1: float = attrs.field()
    h: float = attrs.field()

    def build(self) -> TimeGrid:
        if not self.t1 > self.t0:
            raise ContractError(f"time.t1 must exceed time.t0, got {self.t0} and {self.t1}")
        return TimeGrid.from_window(self.t0, self.t1, self.h)


@attrs.frozen
class OperatorSpec:
    """A multiplier (``diagonal`` or ``matrix`` expressions) or a convolution
    (``kernel`` expressions of the lag with ``support``, or a ``table`` with ``lag_step``)."""

    kind: str = attrs.field(default="multiplier")
    diagonal: list[str] | None = attrs.field(default=None)
    matrix: list[list[str]] | None = attrs.field(default=None)
    kernel: list[str] | None = attrs.field(default=None)
    support: float | None = attrs.field(default=None)
    table: list[list[float]] | None = attrs.field(default=None)
    lag_step: float | None = attrs.field(default=None)

    def build(self, name: str) -> Operator:
        if self.kind == "multiplier":
            if (self.diagonal is None) == (self.matrix is None):
                raise ContractError(f"{name}: give exactly one of 'diagonal' and 'matrix'")
            return MultiplierOperator.from_expressions(
                self.diagonal if self.matrix is None else self.matrix
            )
        if self.kind == "convolution":
            if self.kernel is not None and self.support is not None:
                kernel = ExpressionArray(self.kernel)
                return ConvolutionOperator(kernel, self.support, len(self.kernel))
            if self.table is not None and self.lag_step is not None:
                return ConvolutionOperator.from_table(self.table, self.lag_step)
            raise ContractError(
                f"{name}: a convolution needs 'kernel' and 'support' or 'table' and 'lag_step'"
            )
        raise ContractError(f"{name}.kind must be 'multiplier' or 'convolution', got '{self.kind}'")


@attrs.frozen
class LawSpec:
    M: OperatorSpec = attrs.field()
    N: OperatorSpec = attrs.field()
    Mprime: OperatorSpec | None = attrs.field(default=None)
    rho0: float = attrs.field(default=0.1)

    def build(self) -> MaterialLaw:
        mprime = None if self.Mprime is None else self.Mprime.build("law.Mprime")
        return MaterialLaw(self.M.build("law.M"), self.N.build("law.N"), mprime, self.rho0)


@attrs.frozen
class RelationSpec:
    """A scalar graph: ``linear``, ``sign``, ``saturation`` or a piecewise-linear ``soft``."""

    kind: str = attrs.field()
    alpha: float = attrs.field(default=1.0)
    mu0: float = attrs.field(default=1.0)
    knee: float = attrs.field(default=1.0)
    mu_sat: float = attrs.field(default=0.1)
    breakpoints: list[list[float]] = attrs.field(factory=list)
    left_slope: float = attrs.field(default=0.0)
    right_slope: float = attrs.field(default=0.0)

    def build(self) -> ScalarGraph:
        if self.kind == "linear":
            return LinearGraph(self.alpha)
        if self.kind == "sign":
            return sign_graph()
        if self.kind == "saturation":
            return saturation_graph(self.mu0, self.knee, self.mu_sat)
        if self.kind == "soft":
            return SoftGraph(self.breakpoints, self.left_slope, self.right_slope)
        raise ContractError(
            f"relation.kind must be linear, sign, saturation or soft, got '{self.kind}'"
        )


@attrs.frozen
class MaxwellSpec:
    """Grid and media of a Maxwell scenario.

    ``sigma_edges`` and ``kappa_edges`` give one constant value per edge and replace
    ``sigma`` and ``kappa``. A time-dependent ``sigma`` needs ``sigma_prime``.
    """

    nx: int = attrs.field()
    ny: int = attrs.field()
    Z: RelationSpec = attrs.field()
    source: SourceSpec = attrs.field(factory=SourceSpec)
    dx: float | None = attrs.field(default=None)
    dy: float | None = attrs.field(default=None)
    sigma: str = attrs.field(default="1")
    kappa: str = attrs.field(default="0")
    sigma_prime: str | None = attrs.field(default=None)
    sigma_edges: list[float] | None = attrs.field(default=None)
    kappa_edges: list[float] | None = attrs.field(default=None)


@attrs.frozen
class ScenarioSpec:
    """Everything needed to run one scenario, including run settings."""

    kind: str = attrs.field()
    time: TimeSpec = attrs.field()
    rho: float = attrs.field(default=1.0)
    name: str | None = attrs.field(default=None)
    law: LawSpec | None = attrs.field(default=None)
    relation: RelationSpec | None = attrs.field(default=None)
    f: list[str] | None = attrs.field(default=None)
    maxwell: MaxwellSpec | None = attrs.field(default=None)
    routes: str = attrs.field(default="both")
    tol: float = attrs.field(default=1e-8)
    seed: int = attrs.field(default=0)
    checks: list[str] = attrs.field(factory=list)
    amplitudes: list[float] = attrs.field(factory=list)
    perturbation_time: float | None = attrs.field(default=None)
    rho2: float | None = attrs.field(default=None)

    def __attrs_post_init__(self):
        if self.kind == "inclusion":
            missing = [key for key in ("law", "relation", "f") if getattr(self, key) is None]
            if missing:
                raise ContractError(f"An inclusion scenario needs {', '.join(missing)}")
        elif self.kind == "maxwell":
            if self.maxwell is None:
                raise ContractError("A maxwell scenario needs the 'maxwell' section")
        else:
            raise ContractError(f"kind must be 'inclusion' or 'maxwell', got '{self.kind}'")
        if self.routes != "both" and self.routes not in ROUTES:
            raise ContractError(f"routes must be yosida, timestep or both, got '{self.routes}'")
        unknown = sorted(set(self.checks) - set(CHECKS))
        if unknown:
            raise ContractError(f"Unknown checks: {', '.join(unknown)}")

    def weight(self) -> Weight:
        return Weight(self.rho)

    def problem(self) -> Problem:
        """The inclusion of an ``inclusion`` scenario."""
        if self.kind != "inclusion":
            raise ContractError("Only inclusion scenarios define a generic problem")
        law = self.law.build()
        grid = self.time.build()
        f = WeightedSignal.from_function(grid, self.weight(), ExpressionArray(self.f))
        return Problem(law, LiftedRelation(self.relation.build()), f)

    def maxwell_scenario(self) -> MaxwellScenario:
        if self.kind != "maxwell":
            raise ContractError("Only maxwell scenarios define a Maxwell simulation")
        spec = self.maxwell
        spacing = {"dx": spec.dx, "dy": spec.dy}
        spacing = {key: value for key, value in spacing.items() if value is not None}
        return MaxwellScenario(
            grid=StaggeredGrid2D(spec.nx, spec.ny, **spacing),
            time=self.time.build(),
            weight=self.weight(),
            Z=spec.Z.build(),
            source=spec.source,
            sigma=spec.sigma if spec.sigma_edges is None else spec.sigma_edges,
            kappa=spec.kappa if spec.kappa_edges is None else spec.kappa_edges,
            sigma_prime=spec.sigma_prime,
            rho0=self.law.rho0 if self.law is not None else 0.1,
        )

    def with_overrides(self, **overrides) -> "ScenarioSpec":
        """Replace run settings, ignoring overrides that are None."""
        return attrs.evolve(self, **{k: v for k, v in overrides.items() if v is not None})


def _converter() -> cattrs.Converter:
    converter = cattrs.Converter(forbid_extra_keys=True)
    converter.register_structure_hook(str, _structure_str)
    return converter


def _structure_str(value, _) -> str:
    if isinstance(value, bool) or not isinstance(value, str | int | float):
        raise TypeError(f"expected a string or a number, got {value!r}")
    return str(value)


def structure_scenario(data: dict) -> ScenarioSpec:
    """Structure unstructured scenario data, raising ContractError with JSON paths."""
    try:
        return _converter().structure(data, ScenarioSpec)
    except cattrs.ClassValidationError as exc:
        raise ContractError("Invalid scenario: " + "; ".join(cattrs.transform_error(exc))) from exc


def load_scenario(path: str | Path) -> ScenarioSpec:
    path = Path(path)
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ContractError(f"{path} is not valid JSON: {exc}") from exc
    spec = structure_scenario(data)
    if spec.name is None:
        spec = attrs.evolve(spec, name=path.stem)
    return spec
