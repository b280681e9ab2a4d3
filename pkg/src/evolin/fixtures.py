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
"""Shipped problems with known behavior, used by the test suite and ``evolin suite``."""

import numpy as np

from .expressions import ExpressionArray
from .material import ConvolutionOperator, MaterialLaw, MultiplierOperator
from .maxwell import MaxwellScenario, SourceSpec, StaggeredGrid2D
from .monotone import LinearGraph, LiftedRelation, saturation_graph, sign_graph
from .solver import Problem
from .weighted_time import TimeGrid, Weight, WeightedSignal

__all__ = (
    "FIXTURES",
    "MULTIPLIER_FIXTURES",
    "convolution_memory",
    "maxwell_linear",
    "maxwell_saturation",
    "ode_linear",
    "ode_linear_exact",
    "sign_step",
    "time_varying",
    "two_component",
    "violating",
)


def _signal(grid: TimeGrid, rho: float, *expressions: str) -> WeightedSignal:
    return WeightedSignal.from_function(grid, Weight(rho), ExpressionArray(list(expressions)))


def _identity_law(dim: int = 1, n: float = 0.0) -> MaterialLaw:
    return MaterialLaw(MultiplierOperator.constant(1.0, dim), MultiplierOperator.constant(n, dim))


def ode_linear(h: float = 1e-2, rho: float = 1.0, window=(-1.0, 8.0)) -> Problem:
    """``u' + u = step``, solved by ``u(t) = 1 - exp(-t)`` for t >= 0."""
    grid = TimeGrid.from_window(*window, h)
    return Problem(_identity_law(), LiftedRelation(LinearGraph(1.0)), _signal(grid, rho, "step(t)"))


def ode_linear_exact(problem: Problem) -> WeightedSignal:
    t = problem.grid.times
    return problem.f.with_values(np.where(t >= 0, -np.expm1(-np.maximum(t, 0)), 0.0))


def sign_step(h: float = 2e-2, rho: float = 1.0, window=(-1.0, 4.0)) -> Problem:
    """``u' + sign(u) ∋ 0.5 step``, whose solution vanishes identically."""
    grid = TimeGrid.from_window(*window, h)
    return Problem(_identity_law(), LiftedRelation(sign_graph()), _signal(grid, rho, "0.5*step(t)"))


def time_varying(h: float = 2e-2, rho: float = 1.0, window=(-1.0, 4.0)) -> Problem:
    """A time-dependent multiplier ``m(t) = 1 + 0.5 sin(t)`` with a saturating relation."""
    grid = TimeGrid.from_window(*window, h)
    law = MaterialLaw(
        MultiplierOperator.from_expressions(["1 + 0.5*sin(t)"]),
        MultiplierOperator.constant(0.2, 1),
        MultiplierOperator.from_expressions(["0.5*cos(t)"]),
    )
    f = _signal(grid, rho, "2*sin(2*t)**2*step(t)*step(3 - t)")
    return Problem(law, LiftedRelation(saturation_graph(1.0, 0.5, 0.2)), f)


def convolution_memory(h: float = 2e-2, rho: float = 1.0, window=(-1.0, 4.0)) -> Problem:
    """``u' + k * u + u = step`` with the memory kernel ``k(s) = 0.7 exp(-s)``."""
    grid = TimeGrid.from_window(*window, h)
    memory = ConvolutionOperator(ExpressionArray(["0.7*exp(-t)"]), 10.0, 1)
    law = MaterialLaw(MultiplierOperator.constant(1.0, 1), memory)
    return Problem(law, LiftedRelation(LinearGraph(1.0)), _signal(grid, rho, "step(t)"))


def two_component(h: float = 2e-2, rho: float = 1.0, window=(-1.0, 4.0)) -> Problem:
    """A coupled full-matrix multiplier with a componentwise sign relation."""
    grid = TimeGrid.from_window(*window, h)
    law = MaterialLaw(
        MultiplierOperator.constant([[1.0, 0.2], [0.2, 1.0]]),
        MultiplierOperator.constant([0.1, 0.3]),
    )
    f = _signal(grid, rho, "1.5*step(t)", "sin(t)*step(t)")
    return Problem(law, LiftedRelation(sign_graph()), f)


def violating(h: float = 2e-2, rho: float = 1.0, window=(-1.0, 4.0)) -> Problem:
    """``N = -1`` overwhelms the coercivity of the derivative, so c_est < 0."""
    grid = TimeGrid.from_window(*window, h)
    return Problem(
        _identity_law(n=-1.0), LiftedRelation(LinearGraph(1.0)), _signal(grid, rho, "step(t)")
    )


def maxwell_linear(
    n: int = 4, h: float = 0.1, t1: float = 5.0, rho: float = 1.0
) -> MaxwellScenario:
    """Linear media ``B = H`` driven by a uniform current switched on at t = 0."""
    return MaxwellScenario(
        grid=StaggeredGrid2D(n, n),
        time=TimeGrid.from_window(-0.5, t1, h),
        weight=Weight(rho),
        Z=LinearGraph(1.0),
        source=SourceSpec("uniform_x", "step"),
    )


def maxwell_saturation(
    n: int = 4, h: float = 0.1, t1: float = 3.0, rho: float = 1.0, amplitude: float = 1.0
) -> MaxwellScenario:
    """Saturating media driven by a current loop pulse."""
    return MaxwellScenario(
        grid=StaggeredGrid2D(n, n),
        time=TimeGrid.from_window(-0.5, t1, h),
        weight=Weight(rho),
        Z=saturation_graph(1.0, 0.05, 0.5),
        source=SourceSpec("loop", "pulse", amplitude, 0.0, 1.0),
    )


FIXTURES = {
    "ode_linear": ode_linear,
    "sign_step": sign_step,
    "time_varying": time_varying,
    "convolution_memory": convolution_memory,
    "two_component": two_component,
}

MULTIPLIER_FIXTURES = ("ode_linear", "sign_step", "time_varying", "two_component")
