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
"""Discrete exponentially weighted time lines and the causal derivative calculus.

Signals live on a finite uniform grid and vanish before its first sample.
The weighted inner product is the left-rectangle rule with weight ``exp(-2 rho t)``,
which pairs with the backward difference used for the time derivative:
together they give the discrete coercivity constant returned by :func:`rho_tilde`.
"""

from collections.abc import Callable

import attrs
import numpy as np
import scipy.signal
from numpy.typing import ArrayLike, NDArray

from .errors import ContractError, StructuralError, UnsupportedError

__all__ = (
    "TimeGrid",
    "Weight",
    "WeightedSignal",
    "antiderivative",
    "check_compatible",
    "derivative",
    "difference_quotient",
    "resolvent_time",
    "rho_tilde",
    "sobolev_norm",
    "translate",
    "truncate",
    "weighted_inner",
    "weighted_norm",
)


@attrs.frozen
class TimeGrid:
    """Uniform grid with samples ``t_k = t0 + k h`` for ``k = 0 .. n-1``."""

    t0: float = attrs.field(converter=float)
    n: int = attrs.field(converter=int)
    h: float = attrs.field(converter=float)

    @n.validator
    def _validate_n(self, attribute, value):
        if value < 2:
            raise StructuralError(f"A time grid needs at least two samples, got n={value}")

    @h.validator
    def _validate_h(self, attribute, value):
        if not value > 0:
            raise StructuralError(f"The time step must be positive, got h={value}")

    @classmethod
    def from_window(cls, t0: float, t1: float, h: float) -> "TimeGrid":
        """Create a grid covering ``[t0, t1]`` with step ``h``."""
        return cls(t0, int(round((t1 - t0) / h)) + 1, h)

    @property
    def times(self) -> NDArray:
        return self.t0 + self.h * np.arange(self.n)

    @property
    def t1(self) -> float:
        return self.t0 + (self.n - 1) * self.h

    def count_until(self, a: float) -> int:
        """Number of samples with ``t_k <= a``, robust against roundoff in ``a``."""
        k = np.floor((a - self.t0) / self.h + 1e-9)
        return int(np.clip(k + 1, 0, self.n))

    def refine(self, factor: int) -> "TimeGrid":
        """Return the grid on the same window with the step divided by ``factor``."""
        if factor < 1:
            raise ContractError(f"Refinement factor must be at least 1, got {factor}")
        return TimeGrid(self.t0, (self.n - 1) * factor + 1, self.h / factor)


@attrs.frozen
class Weight:
    """Exponential weight ``exp(-2 rho t)`` of the space L_{2,rho}."""

    rho: float = attrs.field(converter=float)

    @rho.validator
    def _validate_rho(self, attribute, value):
        if not value > 0:
            raise ContractError(f"The exponential weight must be positive, got rho={value}")

    def factors(self, grid: TimeGrid) -> NDArray:
        """Quadrature weights ``exp(-2 rho t_k) h`` on the given grid."""
        return np.exp(-2 * self.rho * grid.times) * grid.h


def _as_values(values: ArrayLike) -> NDArray:
    result = np.array(values, dtype=float)
    if result.ndim == 1:
        result = result.reshape(-1, 1)
    if result.ndim != 2:
        raise StructuralError(f"Signal values must have shape (n, dim), got {result.shape}")
    result.setflags(write=False)
    return result


@attrs.frozen(eq=False)
class WeightedSignal:
    """A sampled trajectory in R^dim, interpreted as zero before ``grid.t0``."""

    grid: TimeGrid = attrs.field()
    weight: Weight = attrs.field()
    values: NDArray = attrs.field(converter=_as_values)

    def __attrs_post_init__(self):
        if self.values.shape[0] != self.grid.n:
            raise StructuralError(
                f"Signal has {self.values.shape[0]} samples but the grid has {self.grid.n}"
            )
        if not np.isfinite(self.values).all():
            raise StructuralError("Signal values must be finite")

    @classmethod
    def zeros(cls, grid: TimeGrid, weight: Weight, dim: int) -> "WeightedSignal":
        return cls(grid, weight, np.zeros((grid.n, dim)))

    @classmethod
    def from_function(
        cls, grid: TimeGrid, weight: Weight, func: Callable[[NDArray], ArrayLike]
    ) -> "WeightedSignal":
        """Sample ``func(times)``, which returns an array of shape (n,) or (n, dim)."""
        return cls(grid, weight, func(grid.times))

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> NDArray:
        return self.grid.times

    def with_values(self, values: ArrayLike) -> "WeightedSignal":
        return WeightedSignal(self.grid, self.weight, values)

    def with_weight(self, weight: Weight) -> "WeightedSignal":
        """The same samples, considered as an element of another weighted space."""
        return WeightedSignal(self.grid, weight, self.values)

    def __add__(self, other: "WeightedSignal") -> "WeightedSignal":
        check_compatible(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "WeightedSignal") -> "WeightedSignal":
        check_compatible(self, other)
        return self.with_values(self.values - other.values)

    def __neg__(self) -> "WeightedSignal":
        return self.with_values(-self.values)

    def __mul__(self, scalar: float) -> "WeightedSignal":
        return self.with_values(self.values * float(scalar))

    __rmul__ = __mul__


def check_compatible(*signals: WeightedSignal):
    """Raise a StructuralError unless all signals share grid, weight and dimension."""
    first = signals[0]
    for other in signals[1:]:
        if other.grid != first.grid:
            raise StructuralError(f"Grid mismatch: {first.grid} versus {other.grid}")
        if other.weight != first.weight:
            raise StructuralError(f"Weight mismatch: {first.weight} versus {other.weight}")
        if other.dim != first.dim:
            raise StructuralError(f"Dimension mismatch: {first.dim} versus {other.dim}")


def rho_tilde(rho: float, h: float) -> float:
    """Discrete coercivity constant of the backward difference, tends to rho as h -> 0."""
    return -np.expm1(-2 * rho * h) / (2 * h)


def weighted_inner(f: WeightedSignal, g: WeightedSignal) -> float:
    """Left-rectangle approximation of the L_{2,rho} inner product."""
    check_compatible(f, g)
    pointwise = np.einsum("kd,kd->k", f.values, g.values)
    return float(np.dot(f.weight.factors(f.grid), pointwise))


def weighted_norm(f: WeightedSignal) -> float:
    return float(np.sqrt(max(weighted_inner(f, f), 0.0)))


def truncate(f: WeightedSignal, a: float) -> WeightedSignal:
    """Set all samples with ``t_k > a`` to zero."""
    values = f.values.copy()
    values[f.grid.count_until(a) :] = 0.0
    return f.with_values(values)


def translate(f: WeightedSignal, m: int) -> WeightedSignal:
    """Shift forward in time by ``m`` samples, filling the end of the window with zeros."""
    if m < 0:
        raise ContractError(f"Translations must be forward in time, got m={m}")
    values = np.zeros_like(f.values)
    if m < f.grid.n:
        values[: f.grid.n - m] = f.values[m:]
    return f.with_values(values)


def difference_quotient(f: WeightedSignal, m: int = 1) -> WeightedSignal:
    """Forward difference quotient ``(translate(f, m) - f) / (m h)``."""
    if m < 1:
        raise ContractError(f"Difference quotients need m >= 1, got m={m}")
    return (translate(f, m) - f) * (1.0 / (m * f.grid.h))


def derivative(u: WeightedSignal) -> WeightedSignal:
    """Backward difference with a vanishing past, ``(u_k - u_{k-1}) / h``."""
    return u.with_values(np.diff(u.values, axis=0, prepend=0.0) / u.grid.h)


def antiderivative(f: WeightedSignal) -> WeightedSignal:
    """Causal cumulative sum ``h * sum_{j <= k} f_j``, the exact inverse of :func:`derivative`."""
    return f.with_values(np.cumsum(f.values, axis=0) * f.grid.h)


def resolvent_time(eps: float, f: WeightedSignal) -> WeightedSignal:
    """Solve ``u + eps * derivative(u) = f`` by the causal recursion.

    Parameters
    ----------
    eps
        Positive time constant.
    f
        Right-hand side.

    Returns
    -------
    u
        The unique solution on the grid, with a vanishing past.
    """
    if not eps > 0:
        raise ContractError(f"The resolvent of the time derivative needs eps > 0, got {eps}")
    r = eps / f.grid.h
    values = scipy.signal.lfilter([1 / (1 + r)], [1.0, -r / (1 + r)], f.values, axis=0)
    return f.with_values(values)


def sobolev_norm(u: WeightedSignal, k: int) -> float:
    """Discrete norm of the H_rho^k scale for k in {-1, 0, 1}."""
    if k == 0:
        return weighted_norm(u)
    if k == 1:
        return weighted_norm(derivative(u))
    if k == -1:
        return weighted_norm(antiderivative(u))
    raise UnsupportedError(f"Sobolev order {k} is not supported, use -1, 0 or 1")
