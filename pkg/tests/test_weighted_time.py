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
"""Unit tests for evolin.weighted_time."""

import numpy as np
import pytest

from evolin.errors import ContractError, StructuralError, UnsupportedError
from evolin.weighted_time import (
    TimeGrid,
    Weight,
    WeightedSignal,
    antiderivative,
    check_compatible,
    derivative,
    difference_quotient,
    resolvent_time,
    rho_tilde,
    sobolev_norm,
    translate,
    truncate,
    weighted_inner,
    weighted_norm,
)


def test_grid_from_window():
    grid = TimeGrid.from_window(-1.0, 1.0, 0.5)
    assert grid.n == 5
    assert grid.t1 == pytest.approx(1.0)
    np.testing.assert_allclose(grid.times, [-1.0, -0.5, 0.0, 0.5, 1.0])


@pytest.mark.parametrize(("n", "h"), [(1, 0.1), (0, 0.1), (5, 0.0), (5, -0.1)])
def test_grid_invalid(n, h):
    with pytest.raises(StructuralError):
        TimeGrid(0.0, n, h)


@pytest.mark.parametrize(
    ("a", "count"),
    [(-5.0, 0), (-1.0, 1), (0.0, 3), (0.1, 3), (0.3, 3), (0.5, 4), (1.0, 5), (9.0, 5)],
)
def test_count_until(a, count):
    grid = TimeGrid.from_window(-1.0, 1.0, 0.5)
    assert grid.count_until(a) == count


def test_refine():
    grid = TimeGrid.from_window(-1.0, 1.0, 0.5).refine(2)
    assert grid.n == 9
    assert grid.h == 0.25
    assert grid.t1 == pytest.approx(1.0)
    with pytest.raises(ContractError):
        grid.refine(0)


@pytest.mark.parametrize("rho", [0.0, -1.0])
def test_weight_invalid(rho):
    with pytest.raises(ContractError):
        Weight(rho)


def test_signal_shapes(grid, weight):
    signal = WeightedSignal(grid, weight, np.ones(grid.n))
    assert signal.values.shape == (grid.n, 1)
    assert signal.dim == 1
    assert not signal.values.flags.writeable
    with pytest.raises(StructuralError):
        WeightedSignal(grid, weight, np.ones(grid.n + 1))
    with pytest.raises(StructuralError):
        WeightedSignal(grid, weight, np.ones((grid.n, 2, 2)))
    values = np.ones(grid.n)
    values[3] = np.nan
    with pytest.raises(StructuralError):
        WeightedSignal(grid, weight, values)


def test_check_compatible(grid, weight):
    f = WeightedSignal.zeros(grid, weight, 2)
    check_compatible(f, f * 2.0)
    with pytest.raises(StructuralError):
        check_compatible(f, f.with_weight(Weight(2.0)))
    with pytest.raises(StructuralError):
        check_compatible(f, WeightedSignal.zeros(grid, weight, 3))
    with pytest.raises(StructuralError):
        check_compatible(f, WeightedSignal.zeros(grid.refine(2), weight, 2))


def test_arithmetic(grid, weight):
    f = WeightedSignal.from_function(grid, weight, np.sin)
    g = WeightedSignal.from_function(grid, weight, np.cos)
    np.testing.assert_allclose((f + g).values[:, 0], np.sin(grid.times) + np.cos(grid.times))
    np.testing.assert_allclose((f - g).values, -(g - f).values)
    np.testing.assert_allclose((3.0 * f).values, (f * 3.0).values)


def test_weighted_norm_constant(grid):
    weight = Weight(0.5)
    ones = WeightedSignal(grid, weight, np.ones(grid.n))
    expected = np.sum(np.exp(-grid.times) * grid.h)
    assert weighted_norm(ones) ** 2 == pytest.approx(expected)


def test_rho_tilde():
    assert rho_tilde(1.0, 1e-9) == pytest.approx(1.0, rel=1e-6)
    assert rho_tilde(1.0, 0.1) < 1.0
    assert rho_tilde(1.0, 0.1) == pytest.approx((1 - np.exp(-0.2)) / 0.2)


@pytest.mark.parametrize("rho", [0.2, 1.0, 3.0])
def test_derivative_coercive(grid, rng, rho):
    weight = Weight(rho)
    for _ in range(20):
        u = WeightedSignal(grid, weight, rng.normal(size=(grid.n, 2)))
        pairing = weighted_inner(derivative(u), u)
        assert pairing >= rho_tilde(rho, grid.h) * weighted_norm(u) ** 2 * (1 - 1e-12)


def test_derivative_inverse(grid, weight, rng):
    f = WeightedSignal(grid, weight, rng.normal(size=(grid.n, 3)))
    np.testing.assert_allclose(derivative(antiderivative(f)).values, f.values, atol=1e-12)
    np.testing.assert_allclose(antiderivative(derivative(f)).values, f.values, atol=1e-12)


def test_translate_truncate(grid, weight):
    f = WeightedSignal.from_function(grid, weight, lambda t: t)
    shifted = translate(f, 4)
    np.testing.assert_allclose(shifted.values[:-4, 0], grid.times[4:])
    assert (shifted.values[-4:] == 0).all()
    assert (translate(f, grid.n + 3).values == 0).all()
    with pytest.raises(ContractError):
        translate(f, -1)
    cut = truncate(f, 0.0)
    assert (cut.values[grid.count_until(0.0) :] == 0).all()
    k = grid.count_until(0.0)
    np.testing.assert_allclose(cut.values[:k], f.values[:k])


@pytest.mark.parametrize("m", [1, 3])
def test_difference_quotient_linear(grid, weight, m):
    f = WeightedSignal.from_function(grid, weight, lambda t: 2 * t)
    quotient = difference_quotient(f, m)
    np.testing.assert_allclose(quotient.values[:-m, 0], 2.0)
    with pytest.raises(ContractError):
        difference_quotient(f, 0)


@pytest.mark.parametrize("eps", [0.01, 0.3, 2.0])
def test_resolvent_time(grid, weight, rng, eps):
    f = WeightedSignal(grid, weight, rng.normal(size=(grid.n, 2)))
    u = resolvent_time(eps, f)
    np.testing.assert_allclose((u + eps * derivative(u)).values, f.values, atol=1e-12)


def test_resolvent_time_invalid(grid, weight):
    with pytest.raises(ContractError):
        resolvent_time(0.0, WeightedSignal.zeros(grid, weight, 1))


def test_sobolev_norm(grid, weight, rng):
    u = WeightedSignal(grid, weight, rng.normal(size=(grid.n, 1)))
    assert sobolev_norm(u, 0) == pytest.approx(weighted_norm(u))
    assert sobolev_norm(u, 1) == pytest.approx(weighted_norm(derivative(u)))
    assert sobolev_norm(u, -1) == pytest.approx(weighted_norm(antiderivative(u)))
    with pytest.raises(UnsupportedError):
        sobolev_norm(u, 2)
