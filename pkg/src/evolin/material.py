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
"""Material laws: the operator triple (M, N, M') acting on sampled trajectories.

Two kinds of causal linear operators are supported: time-dependent multipliers and
causal convolutions with a finitely supported kernel. On a given grid, each operator
is turned into a :class:`Stencil`, which splits its action at step k into an
instantaneous coefficient and a history term. The solvers use this split to advance
one step at a time.
"""

import logging
from collections.abc import Callable

import attrs
import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ContractError, StructuralError
from .expressions import ExpressionArray
from .weighted_time import (
    TimeGrid,
    Weight,
    WeightedSignal,
    derivative,
    rho_tilde,
    sobolev_norm,
    truncate,
    weighted_inner,
    weighted_norm,
)

__all__ = (
    "ConvolutionOperator",
    "MaterialLaw",
    "MultiplierOperator",
    "NormEstimate",
    "PositivityEstimate",
    "Stencil",
    "apply",
    "commutator_residual",
    "delta_policy",
    "operator_norm",
    "positivity_constant",
)


logger = logging.getLogger(__name__)


@attrs.frozen(eq=False)
class Stencil:
    """Causal action of an operator on one grid.

    For multipliers, ``table[k]`` is the coefficient at step k. For convolutions,
    ``table[j]`` is ``h * kernel(j h)``. Diagonal operators store vectors, others
    store square matrices.
    """

    kind: str = attrs.field()
    table: NDArray = attrs.field()
    diagonal: bool = attrs.field()

    def coefficient(self, k: int) -> NDArray:
        """Coefficient of ``u_k`` in ``(T u)_k``."""
        return self.table[k] if self.kind == "multiplier" else self.table[0]

    def history(self, values: NDArray, k: int) -> NDArray:
        """Contribution of ``u_0 .. u_{k-1}`` to ``(T u)_k``."""
        width = min(k, len(self.table) - 1)
        if self.kind == "multiplier" or width == 0:
            return np.zeros(values.shape[1])
        past = values[k - width : k][::-1]
        if self.diagonal:
            return (self.table[1 : width + 1] * past).sum(axis=0)
        return np.einsum("jab,jb->a", self.table[1 : width + 1], past)

    def apply(self, values: NDArray) -> NDArray:
        if self.kind == "multiplier":
            if self.diagonal:
                return self.table * values
            return np.einsum("kij,kj->ki", self.table, values)
        result = np.zeros_like(values)
        n = len(values)
        for j in range(min(n, len(self.table))):
            if self.diagonal:
                result[j:] += self.table[j] * values[: n - j]
            else:
                result[j:] += values[: n - j] @ self.table[j].T
        return result


@attrs.frozen
class _Constant:
    value: NDArray = attrs.field(converter=lambda v: np.array(v, dtype=float))

    def __call__(self, t: NDArray) -> NDArray:
        return np.broadcast_to(self.value, (len(t), *self.value.shape)).copy()


@attrs.frozen
class _ScaledIdentity:
    func: Callable = attrs.field()
    dim: int = attrs.field()

    def __call__(self, t: NDArray) -> NDArray:
        return np.outer(self.func(t), np.ones(self.dim))


@attrs.frozen
class MultiplierOperator:
    """Pointwise multiplication by ``m(t)``.

    The callable maps an array of times of shape (n,) to coefficients of shape
    (n, dim) for diagonal operators or (n, dim, dim) otherwise.
    """

    coefficient: Callable[[NDArray], ArrayLike] = attrs.field()
    dim: int = attrs.field(converter=int)
    diagonal: bool = attrs.field(default=True)

    @classmethod
    def constant(cls, value: ArrayLike, dim: int | None = None) -> "MultiplierOperator":
        """A time-independent multiplier given as scalar, diagonal vector or matrix."""
        value = np.array(value, dtype=float)
        if value.ndim == 0:
            if dim is None:
                raise StructuralError("A scalar multiplier needs an explicit dimension")
            value = np.full(dim, float(value))
        return cls(_Constant(value), value.shape[0], value.ndim == 1)

    @classmethod
    def zero(cls, dim: int) -> "MultiplierOperator":
        return cls.constant(0.0, dim)

    @classmethod
    def scalar_function(cls, func: Callable[[NDArray], NDArray], dim: int) -> "MultiplierOperator":
        """Multiplication by ``func(t)`` times the identity."""
        return cls(_ScaledIdentity(func, dim), dim, True)

    @classmethod
    def from_expressions(cls, entries) -> "MultiplierOperator":
        """Diagonal (list of strings) or full (nested list) multiplier from expressions."""
        expressions = ExpressionArray(entries)
        shape = expressions.shape
        if len(shape) == 2 and shape[0] != shape[1]:
            raise StructuralError(f"Multiplier matrix must be square, got shape {shape}")
        return cls(expressions, shape[0], len(shape) == 1)

    def stencil(self, grid: TimeGrid) -> Stencil:
        table = np.asarray(self.coefficient(grid.times), dtype=float)
        expected = (grid.n, self.dim) if self.diagonal else (grid.n, self.dim, self.dim)
        if table.shape != expected:
            raise StructuralError(f"Multiplier table has shape {table.shape}, expected {expected}")
        return Stencil("multiplier", table, self.diagonal)

    def describe(self) -> str:
        return f"multiplier({'diagonal' if self.diagonal else 'full'}, dim={self.dim})"


@attrs.frozen
class _TableKernel:
    """Piecewise-linear interpolation of a lag-sampled kernel table, zero beyond its end."""

    values: NDArray = attrs.field(converter=lambda v: np.array(v, dtype=float))
    lag_step: float = attrs.field(converter=float)

    def __call__(self, lags: NDArray) -> NDArray:
        grid = self.lag_step * np.arange(len(self.values))
        flat = self.values.reshape(len(self.values), -1)
        columns = [np.interp(lags, grid, flat[:, i], right=0.0) for i in range(flat.shape[1])]
        return np.stack(columns, axis=1).reshape((len(lags), *self.values.shape[1:]))


@attrs.frozen
class ConvolutionOperator:
    """Causal convolution ``(k * u)(t) = int_0^support k(s) u(t - s) ds``.

    The kernel callable maps lags of shape (L,) to arrays of shape (L, dim) for
    diagonal kernels or (L, dim, dim) otherwise.
    """

    kernel: Callable[[NDArray], ArrayLike] = attrs.field()
    support: float = attrs.field(converter=float)
    dim: int = attrs.field(converter=int)
    diagonal: bool = attrs.field(default=True)

    @support.validator
    def _validate_support(self, attribute, value):
        if value < 0:
            raise ContractError(f"Convolution kernels live on lags >= 0, got support {value}")

    @classmethod
    def from_table(cls, values: ArrayLike, lag_step: float) -> "ConvolutionOperator":
        """Kernel sampled at lags ``j * lag_step``; shape (L, dim) or (L, dim, dim)."""
        values = np.array(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        return cls(
            _TableKernel(values, lag_step),
            lag_step * (len(values) - 1),
            values.shape[1],
            values.ndim == 2,
        )

    def stencil(self, grid: TimeGrid) -> Stencil:
        length = min(grid.n, int(np.floor(self.support / grid.h + 1e-9)) + 1)
        lags = grid.h * np.arange(length)
        table = grid.h * np.asarray(self.kernel(lags), dtype=float)
        expected = (length, self.dim) if self.diagonal else (length, self.dim, self.dim)
        if table.shape != expected:
            raise StructuralError(f"Kernel table has shape {table.shape}, expected {expected}")
        return Stencil("convolution", table, self.diagonal)

    def describe(self) -> str:
        return f"convolution(support={self.support:g}, dim={self.dim})"


Operator = MultiplierOperator | ConvolutionOperator


@attrs.frozen
class MaterialLaw:
    """The operators M, N and M' (the commutator defect of M with the time derivative).

    A missing ``Mprime`` means the zero operator, which is exact for constant
    multipliers and for time-invariant convolution kernels.
    """

    M: Operator = attrs.field()
    N: Operator = attrs.field()
    Mprime: Operator | None = attrs.field(default=None)
    rho0: float = attrs.field(default=0.1, converter=float)

    def __attrs_post_init__(self):
        if self.N.dim != self.M.dim:
            raise StructuralError(f"M has dimension {self.M.dim} but N has {self.N.dim}")
        if self.Mprime is not None and self.Mprime.dim != self.M.dim:
            raise StructuralError(f"M has dimension {self.M.dim} but M' has {self.Mprime.dim}")
        if not self.rho0 > 0:
            raise ContractError(f"rho0 must be positive, got {self.rho0}")

    @property
    def dim(self) -> int:
        return self.M.dim

    def operator(self, which: str) -> Operator:
        if which == "M":
            return self.M
        if which == "N":
            return self.N
        if which == "Mprime":
            return MultiplierOperator.zero(self.dim) if self.Mprime is None else self.Mprime
        raise ContractError(f"Unknown operator '{which}', use M, N or Mprime")

    def stencils(self, grid: TimeGrid) -> dict[str, Stencil]:
        return {which: self.operator(which).stencil(grid) for which in ("M", "N", "Mprime")}

    @property
    def is_multiplier(self) -> bool:
        return all(
            isinstance(self.operator(which), MultiplierOperator) for which in ("M", "N", "Mprime")
        )


def apply(law: MaterialLaw, which: str, u: WeightedSignal) -> WeightedSignal:
    """Apply M, N or Mprime to a trajectory."""
    if u.dim != law.dim:
        raise StructuralError(f"Law has dimension {law.dim} but the signal has {u.dim}")
    return u.with_values(law.operator(which).stencil(u.grid).apply(u.values))


def commutator_residual(law: MaterialLaw, u: WeightedSignal) -> float:
    """Relative size of ``D(M u) - M(D u) - M' u`` for a smooth test signal u."""
    defect = derivative(apply(law, "M", u)) - apply(law, "M", derivative(u))
    defect = defect - apply(law, "Mprime", u)
    return weighted_norm(defect) / (1 + sobolev_norm(u, 1))


@attrs.frozen
class PositivityEstimate:
    """Sampled and certified estimates of the positivity constant c.

    ``c_est`` is the smaller of the two, or the sampled value when no certificate applies.
    """

    c_est: float = attrs.field()
    sampled: float = attrs.field()
    certified: float | None = attrs.field()
    violated: bool = attrs.field()


def _random_smooth(grid: TimeGrid, dim: int, rng: np.random.Generator) -> NDArray:
    t = (grid.times - grid.t0) / (grid.t1 - grid.t0)
    values = np.zeros((grid.n, dim))
    for _ in range(3):
        freq = np.exp(rng.uniform(np.log(0.05), np.log(0.25 * grid.n)))
        phase = rng.uniform(0, 2 * np.pi)
        values += np.outer(np.cos(2 * np.pi * freq * t + phase), rng.normal(size=dim))
    return values


def _certified_bound(law: MaterialLaw, weight: Weight, grid: TimeGrid) -> float | None:
    """Summation-by-parts lower bound, valid for symmetric positive semidefinite multipliers.

    ``min_k eig_min(rho_tilde m_k + (m_k - m_{k-1}) / (2 h) + sym(n_k))`` with the
    difference term dropped at k = 0.
    """
    if not law.is_multiplier:
        return None
    stencils = law.stencils(grid)
    m = stencils["M"].table
    n = stencils["N"].table
    if not stencils["M"].diagonal:
        if abs(m - m.transpose(0, 2, 1)).max() > 1e-12 * max(abs(m).max(), 1.0):
            return None
        if np.linalg.eigvalsh(m).min() < -1e-12:
            return None
    elif m.min() < -1e-12:
        return None
    dm = np.diff(m, axis=0, prepend=m[:1]) / grid.h
    matrix = rho_tilde(weight.rho, grid.h) * m + 0.5 * dm
    if stencils["M"].diagonal and stencils["N"].diagonal:
        return float((matrix + n).min())
    if stencils["M"].diagonal:
        matrix = np.einsum("ki,ij->kij", matrix, np.eye(law.dim))
    if stencils["N"].diagonal:
        n = np.einsum("ki,ij->kij", n, np.eye(law.dim))
    total = matrix + 0.5 * (n + n.transpose(0, 2, 1))
    return float(np.linalg.eigvalsh(total).min())


def positivity_constant(
    law: MaterialLaw,
    weight: Weight,
    grid: TimeGrid,
    trials: int = 200,
    rng: np.random.Generator | None = None,
) -> PositivityEstimate:
    """Estimate c in ``Re <(D M + N) phi, truncate(phi, a)> >= c |truncate(phi, a)|^2``.

    Parameters
    ----------
    law
        The material law.
    weight
        The exponential weight of the space.
    grid
        The time grid on which the law is discretized.
    trials
        Number of random smooth test signals and cutoffs.
    rng
        Source of randomness, a fixed default seed is used when omitted.

    Returns
    -------
    estimate
        Sampled minimum of the Rayleigh quotient and, for multiplier laws, a certified
        lower bound.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    stencils = law.stencils(grid)
    sampled = np.inf
    for trial in range(trials):
        values = np.ones((grid.n, law.dim)) if trial == 0 else _random_smooth(grid, law.dim, rng)
        phi = WeightedSignal(grid, weight, values)
        image = derivative(phi.with_values(stencils["M"].apply(values)))
        image = image + phi.with_values(stencils["N"].apply(values))
        a = grid.t1 if trial == 0 else rng.uniform(grid.t0, grid.t1)
        cut = truncate(phi, a)
        norm2 = weighted_inner(cut, cut)
        if norm2 > 0:
            sampled = min(sampled, weighted_inner(image, cut) / norm2)
    certified = _certified_bound(law, weight, grid)
    c_est = sampled if certified is None else min(sampled, certified)
    if c_est <= 0:
        logger.warning("Material law is not uniformly positive: c_est = %.4g", c_est)
    return PositivityEstimate(float(c_est), float(sampled), certified, bool(c_est <= 0))


@attrs.frozen
class NormEstimate:
    """Operator norm estimate, maximized over a list of weights."""

    value: float = attrs.field()
    per_weight: list[float] = attrs.field()
    flagged: bool = attrs.field(default=False)


def _convolution_norm(
    stencil: Stencil,
    grid: TimeGrid,
    rho: float,
    rng: np.random.Generator,
    max_iter: int,
    tol: float,
) -> tuple[float, bool]:
    """Power iteration for the convolution conjugated with the square root of the weight."""
    damping = np.exp(-rho * grid.h * np.arange(len(stencil.table)))
    table = stencil.table * damping.reshape((-1,) + (1,) * (stencil.table.ndim - 1))
    damped = Stencil("convolution", table, stencil.diagonal)
    dim = table.shape[1]

    def adjoint(values):
        result = np.zeros_like(values)
        n = len(values)
        for j in range(min(n, len(table))):
            if damped.diagonal:
                result[: n - j] += table[j] * values[j:]
            else:
                result[: n - j] += values[j:] @ table[j]
        return result

    x = rng.normal(size=(grid.n, dim))
    x /= np.linalg.norm(x)
    estimate = 0.0
    for _ in range(max_iter):
        y = adjoint(damped.apply(x))
        new_estimate = float(np.sqrt(np.linalg.norm(y)))
        norm_y = np.linalg.norm(y)
        if norm_y == 0:
            return 0.0, False
        x = y / norm_y
        if abs(new_estimate - estimate) <= tol * new_estimate:
            return new_estimate, False
        estimate = new_estimate
    frobenius = float(sum(np.linalg.norm(np.atleast_1d(block)) for block in table))
    return frobenius, True


def operator_norm(
    law: MaterialLaw,
    which: str,
    weights: list[Weight],
    grid: TimeGrid,
    rng: np.random.Generator | None = None,
    max_iter: int = 2000,
    tol: float = 1e-9,
) -> NormEstimate:
    """Norm of M, N or Mprime on the weighted spaces of the given weights.

    Multipliers do not depend on the weight and their norm is the largest pointwise
    spectral norm. Convolutions use power iteration; if it stagnates, the sum of the
    kernel block norms is returned as an upper bound and the estimate is flagged.
    """
    if len(weights) == 0:
        raise ContractError("operator_norm needs at least one weight")
    rng = np.random.default_rng(0) if rng is None else rng
    stencil = law.operator(which).stencil(grid)
    if stencil.kind == "multiplier":
        if stencil.diagonal:
            value = float(np.abs(stencil.table).max())
        else:
            value = float(np.linalg.norm(stencil.table, ord=2, axis=(1, 2)).max())
        return NormEstimate(value, [value] * len(weights))
    results = [_convolution_norm(stencil, grid, w.rho, rng, max_iter, tol) for w in weights]
    per_weight = [value for value, _ in results]
    return NormEstimate(max(per_weight), per_weight, any(flag for _, flag in results))


def delta_policy(norm_mprime: float, norm_n: float) -> float:
    """Shift parameter ``delta > |M'| + |N|`` with a margin of at least one."""
    total = norm_mprime + norm_n
    return total + max(1.0, 0.1 * total)
