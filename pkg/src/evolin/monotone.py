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
"""Maximal monotone relations, represented by their resolvents.

Scalar graphs act on the real line and are lifted componentwise to vectors and to
sampled trajectories. Block relations combine scalar graphs on component ranges with
a skew-symmetric coupling matrix. Every algorithm in Evolin only needs the resolvent
``(1 + lam A)^{-1}``, which is total and nonexpansive for maximal monotone ``A``.

The per-step kernel :func:`solve_pointwise` solves ``G u + A(u) ∋ r`` for a positive
definite matrix ``G``. Both solver routes reduce to it.
"""

import logging
from collections.abc import Callable

import attrs
import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

from .errors import ContractError, ConvergenceError, DomainError, StructuralError, UnsupportedError
from .weighted_time import WeightedSignal

__all__ = (
    "BlockRelation",
    "BoundednessReport",
    "CustomGraph",
    "LiftedRelation",
    "LinearGraph",
    "ProbeReport",
    "Relation",
    "ScalarGraph",
    "SoftGraph",
    "SupCriterionReport",
    "boundedness_probe",
    "inclusion_residual",
    "monotonicity_probe",
    "newton_inclusion",
    "perturbed_resolve",
    "relation_components",
    "resolve",
    "saturation_graph",
    "sign_graph",
    "solve_pointwise",
    "yosida",
    "yosida_sup_criterion",
)


logger = logging.getLogger(__name__)


def _check_lambda(lam: ArrayLike):
    if not np.all(np.asarray(lam) > 0):
        raise ContractError(f"Resolvents need lambda > 0, got {lam}")


@attrs.frozen
class ScalarGraph:
    """Base class for maximal monotone graphs in R x R."""

    def resolve(self, lam: ArrayLike, z: ArrayLike) -> NDArray:
        """Evaluate ``(1 + lam a)^{-1}(z)`` elementwise, with broadcasting of lam and z."""
        raise NotImplementedError

    def resolve_slope(self, lam: ArrayLike, z: ArrayLike) -> NDArray:
        """Derivative of the resolvent with respect to z (a generalized one at kinks)."""
        raise NotImplementedError

    def graph_distance(self, u: ArrayLike, v: ArrayLike) -> NDArray:
        """Euclidean distance of the pairs (u, v) to the graph."""
        raise NotImplementedError

    def minimal_section(self, x: ArrayLike) -> NDArray:
        """Element of smallest magnitude in a(x)."""
        raise NotImplementedError

    def shifted(self, c: float) -> "ScalarGraph":
        """Return the graph of ``a - c``, which must remain monotone."""
        raise NotImplementedError

    @property
    def min_slope(self) -> float:
        """Largest c for which the graph is c-monotone."""
        raise NotImplementedError

    def contains_origin(self) -> bool:
        return bool(abs(float(self.resolve(1.0, 0.0))) <= 1e-12)

    def describe(self) -> str:
        return type(self).__name__


@attrs.frozen
class LinearGraph(ScalarGraph):
    """The linear relation ``v = alpha u`` with ``alpha >= 0``."""

    alpha: float = attrs.field(converter=float)

    @alpha.validator
    def _validate_alpha(self, attribute, value):
        if value < 0:
            raise ContractError(f"A linear monotone graph needs alpha >= 0, got {value}")

    def resolve(self, lam, z):
        _check_lambda(lam)
        return np.asarray(z, dtype=float) / (1 + np.asarray(lam, dtype=float) * self.alpha)

    def resolve_slope(self, lam, z):
        lam, z = np.broadcast_arrays(np.asarray(lam, dtype=float), np.asarray(z, dtype=float))
        return 1 / (1 + lam * self.alpha)

    def graph_distance(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return abs(v - self.alpha * u) / np.sqrt(1 + self.alpha**2)

    def minimal_section(self, x):
        return self.alpha * np.asarray(x, dtype=float)

    def shifted(self, c):
        if c > self.alpha:
            raise ContractError(f"linear({self.alpha}) is not {c}-monotone")
        return LinearGraph(self.alpha - c)

    @property
    def min_slope(self):
        return self.alpha

    def contains_origin(self):
        return True

    def describe(self):
        return f"linear({self.alpha:g})"


def _as_breakpoints(value) -> tuple[tuple[float, float, float], ...]:
    return tuple((float(x), float(lo), float(hi)) for x, lo, hi in value)


@attrs.frozen
class SoftGraph(ScalarGraph):
    """Piecewise-linear monotone graph.

    Each breakpoint ``(x_i, y_lo, y_hi)`` contributes a vertical segment from
    ``(x_i, y_lo)`` to ``(x_i, y_hi)``. Consecutive breakpoints are joined by straight
    lines from ``(x_i, y_hi)`` to ``(x_{i+1}, y_lo)``. Beyond the outermost breakpoints,
    the graph continues as rays with slopes ``left_slope`` and ``right_slope``.
    """

    breakpoints: tuple[tuple[float, float, float], ...] = attrs.field(converter=_as_breakpoints)
    left_slope: float = attrs.field(default=0.0, converter=float)
    right_slope: float = attrs.field(default=0.0, converter=float)

    def __attrs_post_init__(self):
        if len(self.breakpoints) == 0:
            raise ContractError("A soft graph needs at least one breakpoint")
        if self.left_slope < 0 or self.right_slope < 0:
            raise ContractError("The slopes of a soft graph beyond its breakpoints must be >= 0")
        for i, (x, lo, hi) in enumerate(self.breakpoints):
            if lo > hi:
                raise ContractError(f"Breakpoint {i} has an empty interval [{lo}, {hi}]")
            if i > 0:
                xp, _, hip = self.breakpoints[i - 1]
                if not x > xp:
                    raise ContractError(f"Breakpoint {i} does not increase: x={x} after {xp}")
                if hip > lo:
                    raise ContractError(
                        f"Graph decreases between breakpoints {i - 1} and {i}: {hip} > {lo}"
                    )

    @property
    def _vertices(self) -> tuple[NDArray, NDArray]:
        table = np.array(self.breakpoints)
        xs = np.repeat(table[:, 0], 2)
        ys = table[:, 1:].ravel()
        return xs, ys

    def _locate(self, lam, z):
        """Find the piece of the polyline ``u + lam a(u)`` that contains z."""
        _check_lambda(lam)
        lam, z = np.broadcast_arrays(np.asarray(lam, dtype=float), np.asarray(z, dtype=float))
        shape = z.shape
        lam = lam.ravel()
        z = z.ravel()
        xs, ys = self._vertices
        s = xs + lam[:, None] * ys
        idx = np.sum(s <= z[:, None], axis=1)
        return shape, lam, z, xs, s, idx

    def _pieces(self, lam, z):
        shape, lam, z, xs, s, idx = self._locate(lam, z)
        nv = len(xs)
        left = idx == 0
        right = idx == nv
        mid = ~(left | right)
        a = np.clip(idx - 1, 0, nv - 1)
        b = np.clip(idx, 0, nv - 1)
        sa = np.take_along_axis(s, a[:, None], axis=1)[:, 0]
        sb = np.take_along_axis(s, b[:, None], axis=1)[:, 0]
        return shape, lam, z, xs, s, left, right, mid, a, b, sa, sb

    def resolve(self, lam, z):
        shape, lam, z, xs, s, left, right, mid, a, b, sa, sb = self._pieces(lam, z)
        u = np.empty_like(z)
        u[left] = xs[0] + (z[left] - s[left, 0]) / (1 + lam[left] * self.left_slope)
        u[right] = xs[-1] + (z[right] - s[right, -1]) / (1 + lam[right] * self.right_slope)
        xa = xs[a[mid]]
        u[mid] = xa + (xs[b[mid]] - xa) * (z[mid] - sa[mid]) / (sb[mid] - sa[mid])
        return u.reshape(shape)

    def resolve_slope(self, lam, z):
        shape, lam, z, xs, s, left, right, mid, a, b, sa, sb = self._pieces(lam, z)
        slope = np.empty_like(z)
        slope[left] = 1 / (1 + lam[left] * self.left_slope)
        slope[right] = 1 / (1 + lam[right] * self.right_slope)
        slope[mid] = (xs[b[mid]] - xs[a[mid]]) / (sb[mid] - sa[mid])
        return slope.reshape(shape)

    def graph_distance(self, u, v):
        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        shape = u.shape
        p = np.stack([u.ravel(), v.ravel()], axis=1)
        xs, ys = self._vertices
        vertices = np.stack([xs, ys], axis=1)
        # Finite segments, then the two rays.
        start = vertices[:-1]
        delta = vertices[1:] - start
        rel = p[:, None, :] - start[None, :, :]
        length2 = np.einsum("qd,qd->q", delta, delta)
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.einsum("pqd,qd->pq", rel, delta) / length2
        t = np.where(length2 > 0, np.clip(t, 0, 1), 0.0)
        dist = np.linalg.norm(rel - t[:, :, None] * delta[None, :, :], axis=2)
        if dist.shape[1] == 0:
            dist = np.full((len(p), 1), np.inf)
        best = dist.min(axis=1)
        for origin, direction in [
            (vertices[0], np.array([-1.0, -self.left_slope])),
            (vertices[-1], np.array([1.0, self.right_slope])),
        ]:
            rel = p - origin
            t = np.clip(rel @ direction / (direction @ direction), 0, None)
            best = np.minimum(best, np.linalg.norm(rel - t[:, None] * direction, axis=1))
        return best.reshape(shape)

    def section(self, x: ArrayLike) -> tuple[NDArray, NDArray]:
        """Return the interval ``[lo, hi]`` of graph values at x."""
        x = np.asarray(x, dtype=float)
        table = np.array(self.breakpoints)
        bx, blo, bhi = table.T
        lo = np.empty_like(x)
        left = x < bx[0]
        right = x > bx[-1]
        lo[left] = blo[0] + self.left_slope * (x[left] - bx[0])
        lo[right] = bhi[-1] + self.right_slope * (x[right] - bx[-1])
        inner = ~(left | right)
        i = np.clip(np.searchsorted(bx, x[inner], side="right") - 1, 0, max(len(bx) - 2, 0))
        if len(bx) > 1:
            frac = (x[inner] - bx[i]) / (bx[i + 1] - bx[i])
            lo[inner] = bhi[i] + frac * (blo[i + 1] - bhi[i])
        else:
            lo[inner] = blo[0]
        hi = lo.copy()
        on_break = np.isin(x, bx)
        where = np.searchsorted(bx, x[on_break])
        lo[on_break] = blo[where]
        hi[on_break] = bhi[where]
        return lo, hi

    def minimal_section(self, x):
        lo, hi = self.section(x)
        return np.clip(0.0, lo, hi)

    def shifted(self, c):
        try:
            return SoftGraph(
                [(x, lo - c * x, hi - c * x) for x, lo, hi in self.breakpoints],
                self.left_slope - c,
                self.right_slope - c,
            )
        except ContractError as exc:
            raise ContractError(f"Soft graph is not {c}-monotone: {exc}") from exc

    @property
    def min_slope(self):
        slopes = [self.left_slope, self.right_slope]
        for (x0, _, hi0), (x1, lo1, _) in zip(self.breakpoints[:-1], self.breakpoints[1:]):
            slopes.append((lo1 - hi0) / (x1 - x0))
        return min(slopes)

    def contains_origin(self):
        lo, hi = self.section(np.zeros(1))
        return bool(lo[0] <= 1e-14 and hi[0] >= -1e-14)

    def describe(self):
        return f"soft_graph({len(self.breakpoints)} breakpoints)"


@attrs.frozen
class _ShiftedResolvent:
    """Resolvent of ``a - c`` in terms of the resolvent of a."""

    resolvent: Callable = attrs.field()
    c: float = attrs.field()

    def __call__(self, lam, z):
        lam = np.asarray(lam, dtype=float)
        if np.any(lam * self.c >= 1):
            raise DomainError(f"Shifted custom graph is only available for lambda < {1 / self.c}")
        scale = 1 - lam * self.c
        return self.resolvent(lam / scale, np.asarray(z, dtype=float) / scale)


@attrs.frozen
class CustomGraph(ScalarGraph):
    """A graph given only through a user-supplied resolvent ``resolvent(lam, z)``."""

    resolvent: Callable[[NDArray, NDArray], NDArray] = attrs.field()
    name: str = attrs.field(default="custom")
    slope_step: float = attrs.field(default=1e-7)

    def resolve(self, lam, z):
        _check_lambda(lam)
        lam, z = np.broadcast_arrays(np.asarray(lam, dtype=float), np.asarray(z, dtype=float))
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            u = np.asarray(self.resolvent(lam, z), dtype=float)
        bad = ~np.isfinite(u)
        if bad.any():
            index = int(np.flatnonzero(bad.ravel())[0])
            raise DomainError(f"Resolvent of {self.name} is not finite in component {index}")
        return u

    def resolve_slope(self, lam, z):
        z = np.asarray(z, dtype=float)
        eps = self.slope_step * (1 + abs(z))
        return (self.resolve(lam, z + eps) - self.resolve(lam, z - eps)) / (2 * eps)

    def graph_distance(self, u, v):
        u = np.asarray(u, dtype=float)
        return np.sqrt(2) * abs(self.resolve(1.0, u + np.asarray(v, dtype=float)) - u)

    def minimal_section(self, x):
        raise UnsupportedError(f"The minimal section of {self.name} is not available")

    def shifted(self, c):
        return CustomGraph(_ShiftedResolvent(self.resolvent, c), f"{self.name}-{c:g}")

    @property
    def min_slope(self):
        return 0.0

    def describe(self):
        return self.name


def sign_graph() -> SoftGraph:
    """The subdifferential of the absolute value."""
    return SoftGraph([(0.0, -1.0, 1.0)])


def saturation_graph(mu0: float, knee: float, mu_sat: float) -> SoftGraph:
    """Odd saturation curve: slope mu0 for ``|x| <= knee`` and slope mu_sat beyond."""
    if not (mu0 > 0 and knee > 0 and mu_sat > 0):
        raise ContractError("Saturation graphs need positive mu0, knee and mu_sat")
    return SoftGraph(
        [(-knee, -mu0 * knee, -mu0 * knee), (knee, mu0 * knee, mu0 * knee)], mu_sat, mu_sat
    )


@attrs.frozen
class LiftedRelation:
    """A scalar graph applied to every component (and every time sample)."""

    scalar: ScalarGraph = attrs.field()

    def contains_origin(self) -> bool:
        return self.scalar.contains_origin()

    def describe(self) -> str:
        return f"lifted {self.scalar.describe()}"


def _as_blocks(value) -> tuple[tuple[int, int, ScalarGraph], ...]:
    blocks = []
    for start, stop, relation in value:
        if isinstance(relation, LiftedRelation):
            relation = relation.scalar
        blocks.append((int(start), int(stop), relation))
    return tuple(blocks)


def _as_skew(value) -> NDArray | None:
    if value is None:
        return None
    if hasattr(value, "toarray"):
        value = value.toarray()
    result = np.array(value, dtype=float)
    result.setflags(write=False)
    return result


@attrs.frozen(eq=False)
class BlockRelation:
    """Scalar graphs on contiguous component ranges plus an optional skew coupling L."""

    blocks: tuple[tuple[int, int, ScalarGraph], ...] = attrs.field(converter=_as_blocks)
    skew: NDArray | None = attrs.field(default=None, converter=_as_skew)

    def __attrs_post_init__(self):
        position = 0
        for start, stop, _ in self.blocks:
            if start != position or stop <= start:
                raise StructuralError(f"Blocks must tile the components, got [{start}, {stop})")
            position = stop
        if self.skew is not None:
            if self.skew.shape != (position, position):
                raise StructuralError(
                    f"Skew coupling has shape {self.skew.shape}, expected {(position, position)}"
                )
            asym = abs(self.skew + self.skew.T).max()
            if asym > 1e-12 * max(abs(self.skew).max(), 1.0):
                raise ContractError(f"Coupling matrix is not skew-symmetric (defect {asym:.3e})")

    @property
    def dim(self) -> int:
        return self.blocks[-1][1]

    def contains_origin(self) -> bool:
        return all(graph.contains_origin() for _, _, graph in self.blocks)

    def describe(self) -> str:
        parts = ", ".join(f"[{a}:{b}] {g.describe()}" for a, b, g in self.blocks)
        suffix = " + skew coupling" if self.skew is not None else ""
        return f"block({parts}){suffix}"


Relation = ScalarGraph | LiftedRelation | BlockRelation


def relation_components(
    relation: Relation, dim: int
) -> tuple[list[tuple[slice, ScalarGraph]], NDArray | None]:
    """Split a relation into scalar graphs per component range and a skew coupling."""
    if isinstance(relation, ScalarGraph):
        return [(slice(0, dim), relation)], None
    if isinstance(relation, LiftedRelation):
        return [(slice(0, dim), relation.scalar)], None
    if isinstance(relation, BlockRelation):
        if relation.dim != dim:
            raise StructuralError(f"Block relation has dimension {relation.dim}, not {dim}")
        return [(slice(a, b), g) for a, b, g in relation.blocks], relation.skew
    raise UnsupportedError(f"Unknown relation type {type(relation).__name__}")


def resolve(relation: Relation, lam: float, z):
    """Evaluate the resolvent ``(1 + lam A)^{-1}`` on a number, a vector or a trajectory.

    Parameters
    ----------
    relation
        A scalar graph (acting elementwise), a lifted relation or a block relation.
    lam
        Positive resolvent parameter.
    z
        A number, an array of shape (dim,) or a WeightedSignal.

    Returns
    -------
    u
        Same type and shape as z.
    """
    _check_lambda(lam)
    if isinstance(z, WeightedSignal):
        return z.with_values(_resolve_rows(relation, lam, z.values))
    z = np.asarray(z, dtype=float)
    if isinstance(relation, ScalarGraph) or z.ndim == 0:
        graph = relation.scalar if isinstance(relation, LiftedRelation) else relation
        if not isinstance(graph, ScalarGraph):
            raise StructuralError("Block relations act on vectors, not on numbers")
        return graph.resolve(lam, z)
    return _resolve_rows(relation, lam, z[None, :])[0]


def _resolve_rows(relation: Relation, lam: float, rows: NDArray) -> NDArray:
    components, skew = relation_components(relation, rows.shape[1])
    if skew is None:
        result = np.empty_like(rows)
        for sl, graph in components:
            result[:, sl] = graph.resolve(lam, rows[:, sl])
        return result
    diag = np.full(rows.shape[1], 1 / lam)
    return np.array([solve_pointwise(relation, diag, row / lam) for row in rows])


def yosida(relation: Relation, lam: float, x):
    """Yosida approximation ``(x - resolve(lam, x)) / lam``."""
    if isinstance(x, WeightedSignal):
        return (x - resolve(relation, lam, x)) * (1 / lam)
    x = np.asarray(x, dtype=float)
    return (x - resolve(relation, lam, x)) / lam


@attrs.frozen
class ProbeReport:
    """Outcome of a sampled monotonicity check."""

    min_pairing: float = attrs.field()
    passed: bool = attrs.field()
    trials: int = attrs.field()
    witness: dict = attrs.field(factory=dict)


def monotonicity_probe(
    relation: Relation,
    trials: int = 1000,
    rng: np.random.Generator | None = None,
    dim: int | None = None,
) -> ProbeReport:
    """Sample graph pairs through the resolvent and check ``<u - x, v - y> >= 0``.

    Pairs are generated as ``(resolve(lam, z), (z - resolve(lam, z)) / lam)`` for random
    z and lam. A resolvent that cannot be evaluated counts as a failure.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    if dim is None:
        dim = relation.dim if isinstance(relation, BlockRelation) else 1
    vector = not isinstance(relation, ScalarGraph)
    z = rng.normal(scale=3.0, size=(2, trials, dim))
    lam = np.exp(rng.uniform(np.log(1e-2), np.log(1e1), size=(2, trials)))
    try:
        if vector:
            u = np.array([[resolve(relation, lam[s, i], z[s, i]) for i in range(trials)]
                          for s in range(2)])
        else:
            u = relation.resolve(lam[:, :, None], z)
    except DomainError as exc:
        return ProbeReport(-np.inf, False, trials, {"error": str(exc)})
    v = (z - u) / lam[:, :, None]
    pairing = np.einsum("td,td->t", u[0] - u[1], v[0] - v[1])
    scale = (1 + np.abs(z[0]).max(axis=1) + np.abs(z[1]).max(axis=1)) ** 2
    worst = int(np.argmin(pairing / scale))
    passed = bool((pairing >= -1e-10 * scale).all())
    witness = {
        "u": u[0, worst].tolist(),
        "v": v[0, worst].tolist(),
        "x": u[1, worst].tolist(),
        "y": v[1, worst].tolist(),
    }
    if not passed:
        logger.info("Monotonicity probe found pairing %.3e", pairing[worst])
    return ProbeReport(float(pairing.min()), passed, trials, witness)


def perturbed_resolve(
    relation: Relation,
    perturbation: Callable[[NDArray], NDArray],
    lipschitz: float,
    lam: float,
    z,
    tol: float = 1e-12,
    max_iter: int = 10_000,
):
    """Resolvent of ``A + B`` for a Lipschitz B through ``u = resolve(A, lam, z - lam B(u))``.

    The iteration contracts with rate ``lam * lipschitz``.
    """
    _check_lambda(lam)
    if lam * lipschitz >= 1:
        raise ContractError(f"Need lambda * L < 1, got {lam} * {lipschitz}")
    z = np.asarray(z, dtype=float)
    u = resolve(relation, lam, z)
    scale = 1 + np.abs(z).max()
    change = np.inf
    for _ in range(max_iter):
        u_new = resolve(relation, lam, z - lam * np.asarray(perturbation(u), dtype=float))
        change = float(np.abs(u_new - u).max())
        u = u_new
        if change <= tol * scale:
            return u
    raise ConvergenceError("Perturbed resolvent did not converge", residual=change)


@attrs.frozen
class BoundednessReport:
    """Largest minimal-section magnitude found on a sampled box ``[-box, box]``."""

    box: float = attrs.field()
    bound: float = attrs.field()
    bounded: bool = attrs.field()


def boundedness_probe(graph: ScalarGraph, box: float = 10.0, samples: int = 2001):
    """Sampled check that a graph maps the box ``[-box, box]`` into a bounded set.

    This is a probe on a finite box, not a proof of boundedness on all bounded sets.
    Without breakpoints the minimal section is approximated by ``A_lam`` at two small lam;
    a sample where it grows like 1/lam lies outside the domain and makes the bound infinite.
    """
    x = np.linspace(-box, box, samples)
    if isinstance(graph, SoftGraph):
        lo, hi = graph.section(np.concatenate([x, [bp[0] for bp in graph.breakpoints]]))
        bound = float(max(abs(lo).max(), abs(hi).max()))
    else:
        coarse = abs(yosida(graph, 1e-6, x))
        fine = abs(yosida(graph, 1e-8, x))
        bound = np.inf if (fine > 10 * coarse + 1).any() else float(fine.max())
    return BoundednessReport(box, bound, bool(np.isfinite(bound)))


@attrs.frozen
class SupCriterionReport:
    """Regularized solutions of ``(1 + A + B_lam) u ∋ z`` along a lambda schedule.

    ``perturbation`` probes B for boundedness on a box holding the iterates. When B is
    bounded there, A + B is maximal monotone and ``certified`` is true.
    """

    lambdas: list[float] = attrs.field()
    u: list[list[float]] = attrs.field()
    b_norms: list[float] = attrs.field()
    increments: list[float] = attrs.field()
    sup_norm: float = attrs.field()
    bounded: bool = attrs.field()
    converged_u: list[float] = attrs.field()
    perturbation: BoundednessReport = attrs.field()

    @property
    def certified(self) -> bool:
        return self.perturbation.bounded


def _scalar_graph(relation: Relation) -> ScalarGraph:
    if isinstance(relation, LiftedRelation):
        return relation.scalar
    if isinstance(relation, ScalarGraph):
        return relation
    raise UnsupportedError("The sup criterion is implemented for componentwise relations only")


def yosida_sup_criterion(
    relation_a: Relation, relation_b: Relation, z, lambdas: list[float] | None = None
) -> SupCriterionReport:
    """Probe solvability of ``z ∈ (1 + A + B) u`` through the Yosida approximation of B.

    For each lam, ``u + A(u) + B_lam(u) ∋ z`` is solved componentwise by bisection on
    the resolvent parameter w of A: ``u = R_A(w)`` and ``w + B_lam(R_A(w)) = z``, which
    is strictly increasing in w.
    """
    graph_a = _scalar_graph(relation_a)
    graph_b = _scalar_graph(relation_b)
    lambdas = [2.0**-k for k in range(13)] if lambdas is None else list(lambdas)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    solutions, b_norms = [], []
    for lam in lambdas:

        def residual(w, lam=lam):
            u = graph_a.resolve(1.0, w)
            return w + (u - graph_b.resolve(lam, u)) / lam - z

        width = 1 + abs(z)
        lo = z.copy()
        hi = z.copy()
        while (mask := residual(lo) > 0).any():
            lo[mask] -= width[mask]
            width[mask] *= 2
        width = 1 + abs(z)
        while (mask := residual(hi) < 0).any():
            hi[mask] += width[mask]
            width[mask] *= 2
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            below = residual(mid) < 0
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if (hi - lo <= 1e-15 * (1 + abs(mid))).all():
                break
        u = graph_a.resolve(1.0, 0.5 * (lo + hi))
        solutions.append(u)
        b_norms.append(float(np.abs((u - graph_b.resolve(lam, u)) / lam).max()))
    increments = [float(np.abs(b - a).max()) for a, b in zip(solutions[:-1], solutions[1:])]
    sup_norm = max(b_norms)
    tail = b_norms[-3:]
    growing = len(tail) == 3 and tail[2] > 1.5 * tail[1] > 2.25 * tail[0] > 0
    return SupCriterionReport(
        lambdas=lambdas,
        u=[s.tolist() for s in solutions],
        b_norms=b_norms,
        increments=increments,
        sup_norm=sup_norm,
        bounded=bool(np.isfinite(sup_norm) and not growing),
        converged_u=solutions[-1].tolist(),
        perturbation=boundedness_probe(graph_b, max(10.0, 2 * (1 + float(abs(z).max())))),
    )


def _as_matrix(G: NDArray) -> NDArray:
    return np.diag(G) if G.ndim == 1 else G


def solve_pointwise(
    relation: Relation,
    G: ArrayLike,
    r: ArrayLike,
    lam: float | None = None,
    tol: float = 1e-12,
    max_iter: int = 100,
) -> NDArray:
    """Solve ``G u + A(u) ∋ r``, or ``G u + A_lam(u) = r`` when lam is given.

    Parameters
    ----------
    relation
        The monotone relation A acting on vectors of length ``len(r)``.
    G
        A positive definite matrix, given as a vector of diagonal entries or a square array.
    r
        Right-hand side.
    lam
        Optional Yosida parameter.

    Returns
    -------
    u
        The unique solution.

    Notes
    -----
    With a Yosida parameter, the substitution ``u = p + lam v`` with ``(p, v) ∈ A`` turns
    the problem into ``G (1 + lam G)^{-1} p + A(p) ∋ (1 + lam G)^{-1} r``, so the same
    kernel covers both cases.
    """
    r = np.asarray(r, dtype=float)
    dim = len(r)
    G = np.asarray(G, dtype=float)
    if G.ndim == 0:
        G = np.full(dim, float(G))
    if lam is not None:
        _check_lambda(lam)
        if G.ndim == 1:
            scale = 1 + lam * G
            p = solve_pointwise(relation, G / scale, r / scale, None, tol, max_iter)
            v = (r - G * p) / scale
        else:
            shift = np.eye(dim) + lam * G
            p = solve_pointwise(
                relation,
                scipy.linalg.solve(shift, G),
                scipy.linalg.solve(shift, r),
                None,
                tol,
                max_iter,
            )
            v = scipy.linalg.solve(shift, r - G @ p)
        return p + lam * v
    components, skew = relation_components(relation, dim)
    if skew is not None:
        G = _as_matrix(G) + skew
    if G.ndim == 2 and not (G - np.diag(np.diag(G))).any():
        G = np.diag(G).copy()
    if G.ndim == 1:
        if not (G > 0).all():
            index = int(np.flatnonzero(G <= 0)[0])
            raise StructuralError(f"Per-step matrix is not positive in component {index}")
        u = np.empty(dim)
        for sl, graph in components:
            u[sl] = graph.resolve(1 / G[sl], r[sl] / G[sl])
        return u
    return _newton_pointwise(components, G, r, tol, max_iter)


def newton_inclusion(
    relation: Relation,
    G: NDArray,
    r: NDArray,
    mu: ArrayLike | None = None,
    tol: float = 1e-12,
    max_iter: int = 100,
) -> NDArray:
    """Solve ``G u + A(u) ∋ r`` for a square matrix G that need not be positive definite.

    The resolvent parameter mu defaults to the inverse diagonal of G, which must then be
    positive.
    """
    r = np.asarray(r, dtype=float)
    components, skew = relation_components(relation, len(r))
    G = np.asarray(G, dtype=float)
    if skew is not None:
        G = G + skew
    return _newton_pointwise(components, G, r, tol, max_iter, mu)


def _newton_pointwise(components, G, r, tol, max_iter, mu=None) -> NDArray:
    """Semismooth Newton on ``F(w) = G R(w) + (w - R(w)) / mu - r`` with ``u = R(w)``."""
    if mu is None:
        diag = np.diag(G)
        if not (diag > 0).all():
            raise StructuralError("Per-step matrix has a non-positive diagonal")
        mu = 1 / diag
    else:
        mu = np.broadcast_to(np.asarray(mu, dtype=float), r.shape)

    def evaluate(w):
        u = np.empty_like(w)
        slope = np.empty_like(w)
        for sl, graph in components:
            u[sl] = graph.resolve(mu[sl], w[sl])
            slope[sl] = graph.resolve_slope(mu[sl], w[sl])
        return u, slope, G @ u + (w - u) / mu - r

    w = mu * r
    u, slope, residual = evaluate(w)
    norm = np.abs(residual).max()
    threshold = tol * (1 + np.abs(r).max())
    for _ in range(max_iter):
        if norm <= threshold:
            return u
        jacobian = G * slope[None, :] + np.diag((1 - slope) / mu)
        step = scipy.linalg.solve(jacobian, -residual)
        t = 1.0
        while True:
            trial = w + t * step
            u_trial, slope_trial, residual_trial = evaluate(trial)
            norm_trial = np.abs(residual_trial).max()
            if norm_trial < (1 - 1e-4 * t) * norm or t < 1e-10:
                break
            t *= 0.5
        w, u, slope, residual, norm = trial, u_trial, slope_trial, residual_trial, norm_trial
    if norm <= threshold:
        return u
    raise ConvergenceError("Newton iteration for the per-step inclusion failed", residual=norm)


def inclusion_residual(relation: Relation, G: ArrayLike, u: NDArray, r: NDArray) -> float:
    """Largest graph distance of the pairs ``(u, r - G u)`` to the relation."""
    u = np.asarray(u, dtype=float)
    r = np.asarray(r, dtype=float)
    G = np.asarray(G, dtype=float)
    v = r - (G * u if G.ndim <= 1 else G @ u)
    components, skew = relation_components(relation, len(u))
    if skew is not None:
        v = v - skew @ u
    return max(float(np.max(graph.graph_distance(u[sl], v[sl]))) for sl, graph in components)
