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
"""Semistatic quasilinear Maxwell equations on a staggered rectangular grid (TE reduction).

The electric field lives on the interior edges of an ``nx`` by ``ny`` cell grid (the
tangential component vanishes on the boundary), the magnetic fields H and B are scalar
z-components on the cells. With ``curl0: edges -> cells`` and ``curl = curl0.T``, the
unknowns ``(Ẽ, H)`` of the time-integrated system solve

    D(σ Ẽ) + κ Ẽ - curl~ H = -J
    curl~ Ẽ + (Z - c)(H) + c H ∋ 0

after which ``E = D Ẽ`` and ``B = -curl~ Ẽ``.
"""

import logging

import attrs
import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg
from numpy.typing import NDArray

from .errors import ContractError, ConvergenceError, HypothesisViolation, StructuralError
from .expressions import Expression
from .material import MaterialLaw, MultiplierOperator, commutator_residual, positivity_constant
from .monotone import BlockRelation, LinearGraph, ScalarGraph, SoftGraph
from .solver import Problem, SolveReport, solve
from .weighted_time import TimeGrid, Weight, WeightedSignal, derivative

__all__ = (
    "HarmonicProjector",
    "MaxwellDiagnostics",
    "MaxwellOperators",
    "MaxwellRun",
    "MaxwellScenario",
    "SaturationReport",
    "SourceSpec",
    "StaggeredGrid2D",
    "assemble_block",
    "build_operators",
    "run",
    "saturation_study",
    "sigma_consistency",
    "steady_state_oracle",
    "structure_residuals",
)


logger = logging.getLogger(__name__)

AMBIGUITY_BAND = 1e-8
# Smallest h to h/2 ratio of the commutator residual accepted as first order.
CONSISTENCY_RATIO = 1.5


def _default_dx(grid: "StaggeredGrid2D") -> float:
    return 1.0 / grid.nx


def _default_dy(grid: "StaggeredGrid2D") -> float:
    return 1.0 / grid.ny


@attrs.frozen
class StaggeredGrid2D:
    """Cell counts and spacings of a rectangle, by default the unit square."""

    nx: int = attrs.field(converter=int)
    ny: int = attrs.field(converter=int)
    dx: float = attrs.field(default=attrs.Factory(_default_dx, takes_self=True), converter=float)
    dy: float = attrs.field(default=attrs.Factory(_default_dy, takes_self=True), converter=float)

    def __attrs_post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise StructuralError(f"Need at least 2 by 2 cells, got {self.nx} by {self.ny}")
        if not (self.dx > 0 and self.dy > 0):
            raise ContractError("Grid spacings must be positive")

    @property
    def n_ex(self) -> int:
        return self.nx * (self.ny - 1)

    @property
    def n_ey(self) -> int:
        return (self.nx - 1) * self.ny

    @property
    def n_edges(self) -> int:
        return self.n_ex + self.n_ey

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def n_nodes(self) -> int:
        return (self.nx - 1) * (self.ny - 1)

    def cell_centers(self) -> tuple[NDArray, NDArray]:
        x = (np.arange(self.nx) + 0.5) * self.dx
        y = (np.arange(self.ny) + 0.5) * self.dy
        xx, yy = np.meshgrid(x, y, indexing="ij")
        return xx.ravel(), yy.ravel()


def _difference(n: int, step: float) -> scipy.sparse.csr_array:
    """Differences of n - 1 interior node values onto n intervals, zero boundary values."""
    return scipy.sparse.csr_array(
        (scipy.sparse.eye(n, n - 1, 0) - scipy.sparse.eye(n, n - 1, -1)) / step
    )


@attrs.frozen(eq=False)
class HarmonicProjector:
    """Orthogonal projector onto a null space found by a singular value decomposition.

    ``ambiguous`` is set when singular values fall in the band around the rank cutoff,
    in which case the reported dimension is not trustworthy.
    """

    basis: NDArray = attrs.field()
    singular_values: NDArray = attrs.field()
    gap: float = attrs.field()
    ambiguous: bool = attrs.field()

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def matrix(self) -> NDArray:
        return self.basis @ self.basis.T

    def __call__(self, x: NDArray) -> NDArray:
        """Project vectors of shape (size,) or rows of shape (n, size)."""
        return (x @ self.basis) @ self.basis.T


def harmonic_projector(*operators) -> HarmonicProjector:
    """Projector onto the intersection of the kernels of the given sparse matrices."""
    stacked = np.vstack([op.toarray() for op in operators])
    _, s, vh = scipy.linalg.svd(stacked, full_matrices=True)
    size = vh.shape[0]
    padded = np.zeros(size)
    padded[: len(s)] = s
    scale = padded.max(initial=1.0)
    cutoff = AMBIGUITY_BAND * scale
    rank = int((padded > cutoff).sum())
    near = (padded > cutoff * 1e-2) & (padded < cutoff * 1e2)
    ambiguous = bool(near.any())
    if ambiguous:
        logger.warning("Null space dimension %d is ambiguous at cutoff %.3e", size - rank, cutoff)
    kept = padded[padded > cutoff]
    dropped = padded[padded <= cutoff]
    largest_dropped = dropped.max(initial=0.0)
    gap = np.inf if largest_dropped == 0 else float(kept.min(initial=0.0) / largest_dropped)
    return HarmonicProjector(vh[rank:].T.copy(), padded, gap, ambiguous)


@attrs.frozen(eq=False)
class MaxwellOperators:
    """Sparse stencils and harmonic projectors of one grid."""

    grid: StaggeredGrid2D = attrs.field()
    curl0: scipy.sparse.csr_array = attrs.field()
    grad0: scipy.sparse.csr_array = attrs.field()
    edge_projector: HarmonicProjector = attrs.field()
    cell_projector: HarmonicProjector = attrs.field()

    @property
    def curl(self) -> scipy.sparse.csr_array:
        return scipy.sparse.csr_array(self.curl0.T)

    @property
    def div0(self) -> scipy.sparse.csr_array:
        return scipy.sparse.csr_array(-self.grad0.T)

    @property
    def ctilde(self) -> NDArray:
        """``curl0`` followed by the projection onto the orthogonal complement of the
        cell harmonic fields, as a dense (cells, edges) array."""
        dense = self.curl0.toarray()
        return dense - self.cell_projector(dense.T).T


def build_operators(grid: StaggeredGrid2D) -> MaxwellOperators:
    """Assemble ``curl0`` and ``grad0`` with zero tangential boundary values.

    Edges are ordered as all x-edges followed by all y-edges; cells, x-edges, y-edges
    and nodes are each flattened with the x index running slowest.
    """
    dx = _difference(grid.nx, grid.dx)
    dy = _difference(grid.ny, grid.dy)
    eye = scipy.sparse.identity
    curl0 = scipy.sparse.hstack(
        [-scipy.sparse.kron(eye(grid.nx), dy), scipy.sparse.kron(dx, eye(grid.ny))]
    )
    grad0 = scipy.sparse.vstack(
        [scipy.sparse.kron(dx, eye(grid.ny - 1)), scipy.sparse.kron(eye(grid.nx - 1), dy)]
    )
    curl0 = scipy.sparse.csr_array(curl0)
    grad0 = scipy.sparse.csr_array(grad0)
    return MaxwellOperators(
        grid,
        curl0,
        grad0,
        harmonic_projector(curl0, grad0.T),
        harmonic_projector(curl0.T),
    )


def structure_residuals(
    operators: MaxwellOperators, rng: np.random.Generator | None = None
) -> dict[str, float]:
    """Relative residuals of the discrete identities that hold exactly on every grid.

    ``adjointness`` compares ``<curl0 E, H>`` with ``<E, curl H>`` for random E and H,
    ``div_curl`` is the largest entry of ``div0 curl``, and ``projector`` the largest
    entry of ``P @ P - P`` or ``P - P.T`` over both harmonic projectors.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    grid = operators.grid
    E = rng.normal(size=grid.n_edges)
    H = rng.normal(size=grid.n_cells)
    scale = abs(operators.curl0).max()
    pairing = abs((operators.curl0 @ E) @ H - E @ (operators.curl @ H))
    div_curl = abs(operators.div0 @ operators.curl).max() / scale**2
    projector = 0.0
    for harmonic in operators.edge_projector, operators.cell_projector:
        matrix = harmonic.matrix
        projector = max(
            projector,
            np.abs(matrix @ matrix - matrix).max(initial=0.0),
            np.abs(matrix - matrix.T).max(initial=0.0),
        )
    return {
        "adjointness": float(pairing / (scale * np.linalg.norm(E) * np.linalg.norm(H))),
        "div_curl": float(div_curl),
        "projector": float(projector),
    }


SOURCE_PATTERNS = ("uniform_x", "loop", "point")
SOURCE_PROFILES = ("step", "pulse", "table")


@attrs.frozen
class SourceSpec:
    """Source current ``J(t) = amplitude * profile(t) * pattern``."""

    pattern: str = attrs.field(default="uniform_x")
    profile: str = attrs.field(default="step")
    amplitude: float = attrs.field(default=1.0, converter=float)
    start: float = attrs.field(default=0.0, converter=float)
    stop: float = attrs.field(default=np.inf, converter=float)
    times: tuple[float, ...] = attrs.field(default=(), converter=tuple)
    values: tuple[float, ...] = attrs.field(default=(), converter=tuple)

    def __attrs_post_init__(self):
        if self.pattern not in SOURCE_PATTERNS:
            raise ContractError(f"Unknown source pattern '{self.pattern}'")
        if self.profile not in SOURCE_PROFILES:
            raise ContractError(f"Unknown source profile '{self.profile}'")
        if self.profile == "table" and (len(self.times) < 2 or len(self.times) != len(self.values)):
            raise ContractError("A table profile needs matching times and values, at least two")

    def time_profile(self, t: NDArray) -> NDArray:
        if self.profile == "step":
            return (t >= self.start).astype(float)
        if self.profile == "pulse":
            return ((t >= self.start) & (t < self.stop)).astype(float)
        return np.interp(t, self.times, self.values, left=0.0, right=self.values[-1])

    def spatial_pattern(self, operators: MaxwellOperators) -> NDArray:
        grid = operators.grid
        pattern = np.zeros(grid.n_edges)
        if self.pattern == "uniform_x":
            pattern[: grid.n_ex] = 1.0
        elif self.pattern == "loop":
            x, y = grid.cell_centers()
            width = 0.25 * min(grid.nx * grid.dx, grid.ny * grid.dy)
            center_x, center_y = 0.5 * grid.nx * grid.dx, 0.5 * grid.ny * grid.dy
            bump = np.exp(-((x - center_x) ** 2 + (y - center_y) ** 2) / (2 * width**2))
            pattern = operators.curl @ bump
            pattern /= np.abs(pattern).max()
        else:
            pattern[(grid.nx // 2) * (grid.ny - 1) + grid.ny // 2 - 1] = 1.0
        return pattern


def _coefficient(value) -> Expression | float | NDArray:
    if isinstance(value, Expression):
        return value
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return Expression(value)
    if np.ndim(value) == 1:
        return np.asarray(value, dtype=float)
    return float(value)


def _optional_coefficient(value) -> Expression | float | NDArray | None:
    return None if value is None else _coefficient(value)


@attrs.frozen(eq=False)
class _EdgeCellCoefficient:
    """Diagonal multiplier with one coefficient on the edges and one on the cells.

    The edge coefficient is a number, a function of time, or one number per edge.
    """

    edge: Expression | float | NDArray = attrs.field()
    cell: float = attrs.field()
    n_edges: int = attrs.field()
    n_cells: int = attrs.field()

    def __call__(self, t: NDArray) -> NDArray:
        if callable(self.edge):
            edge = np.outer(self.edge(t), np.ones(self.n_edges))
        else:
            edge = np.broadcast_to(self.edge, (len(t), self.n_edges))
        return np.hstack([edge, np.full((len(t), self.n_cells), self.cell)])


@attrs.frozen(eq=False)
class MaxwellScenario:
    """Grid, media and source of one eddy-current simulation.

    ``sigma`` and ``kappa`` are numbers, expressions in t, or arrays with one constant
    value per edge. A time-dependent ``sigma`` needs its derivative ``sigma_prime``,
    which is checked against sigma with the commutator residual and never computed.
    ``Z`` maps H to B and must be c-monotone for some c > 0.
    """

    grid: StaggeredGrid2D = attrs.field()
    time: TimeGrid = attrs.field()
    weight: Weight = attrs.field()
    Z: ScalarGraph = attrs.field()
    source: SourceSpec = attrs.field(factory=SourceSpec)
    sigma: Expression | float | NDArray = attrs.field(default=1.0, converter=_coefficient)
    kappa: Expression | float | NDArray = attrs.field(default=0.0, converter=_coefficient)
    sigma_prime: Expression | float | NDArray | None = attrs.field(
        default=None, converter=_optional_coefficient
    )
    rho0: float = attrs.field(default=0.1, converter=float)

    def __attrs_post_init__(self):
        for name in ("sigma", "kappa", "sigma_prime"):
            value = getattr(self, name)
            if isinstance(value, np.ndarray) and value.shape != (self.grid.n_edges,):
                raise StructuralError(
                    f"{name} needs one value per edge ({self.grid.n_edges}), got {value.shape}"
                )
        if isinstance(self.sigma, Expression) and self.sigma_prime is None:
            raise ContractError(f"sigma = {self.sigma.source} depends on time, give sigma_prime")

    @property
    def c(self) -> float:
        return self.Z.min_slope

    def with_source(self, source: SourceSpec) -> "MaxwellScenario":
        return attrs.evolve(self, source=source)

    def with_Z(self, Z: ScalarGraph) -> "MaxwellScenario":
        return attrs.evolve(self, Z=Z)


def _law(scenario: MaxwellScenario) -> MaterialLaw:
    grid = scenario.grid
    sizes = (grid.n_edges, grid.n_cells)
    dim = sum(sizes)
    mprime = None
    if scenario.sigma_prime is not None:
        rate = _EdgeCellCoefficient(scenario.sigma_prime, 0.0, *sizes)
        mprime = MultiplierOperator(rate, dim)
    return MaterialLaw(
        M=MultiplierOperator(_EdgeCellCoefficient(scenario.sigma, 0.0, *sizes), dim),
        N=MultiplierOperator(_EdgeCellCoefficient(scenario.kappa, scenario.c, *sizes), dim),
        Mprime=mprime,
        rho0=scenario.rho0,
    )


def sigma_consistency(scenario: MaxwellScenario, law: MaterialLaw | None = None) -> float:
    """Ratio of the commutator residuals of the conductivity law at steps h and h/2.

    The test signal is a smooth ramp rising from zero at the start of the window. When
    sigma_prime is the derivative of a smooth sigma the residual is first order in h and
    the ratio is close to 2. An inconsistent sigma_prime leaves a residual that does not
    shrink, and a jump in sigma makes it grow. Returns ``inf`` when both residuals vanish.
    """
    law = _law(scenario) if law is None else law
    time = scenario.time
    width = max(0.25 * (time.t1 - time.t0), 10 * time.h)

    def ramp(t):
        return np.outer(1 - np.exp(-(((t - time.t0) / width) ** 2)), np.ones(law.dim))

    coarse, fine = (
        commutator_residual(law, WeightedSignal.from_function(grid, scenario.weight, ramp))
        for grid in (time, time.refine(2))
    )
    if fine <= 1e-10:
        return np.inf
    return coarse / fine


def source_signal(
    scenario: MaxwellScenario, operators: MaxwellOperators
) -> tuple[WeightedSignal, float]:
    """The source current on the edges with its harmonic part removed, and the removed norm."""
    pattern = scenario.source.spatial_pattern(operators)
    harmonic = operators.edge_projector(pattern)
    removed = float(np.linalg.norm(harmonic))
    if removed > 0:
        logger.info("Removed harmonic source component of norm %.3e", removed)
    profile = scenario.source.amplitude * scenario.source.time_profile(scenario.time.times)
    values = np.outer(profile, pattern - harmonic)
    return WeightedSignal(scenario.time, scenario.weight, values), removed * abs(profile).max()


def assemble_block(
    scenario: MaxwellScenario, operators: MaxwellOperators | None = None
) -> Problem:
    """Build the inclusion for ``(Ẽ, H)`` with right-hand side ``(-J, 0)``."""
    operators = build_operators(scenario.grid) if operators is None else operators
    c = scenario.c
    if not c > 0:
        raise ContractError(f"The constitutive relation must be c-monotone with c > 0, got c={c}")
    law = _law(scenario)
    if law.Mprime is not None and sigma_consistency(scenario, law) < CONSISTENCY_RATIO:
        raise ContractError(
            "sigma_prime is not the time derivative of sigma, or sigma jumps in time"
        )
    estimate = positivity_constant(law, scenario.weight, scenario.time)
    if estimate.c_est <= 0:
        raise HypothesisViolation(
            f"Positivity constant c_est = {estimate.c_est:.4g} <= 0, check sigma and kappa"
        )
    grid = scenario.grid
    ctilde = operators.ctilde
    skew = np.zeros((law.dim, law.dim))
    skew[: grid.n_edges, grid.n_edges :] = -ctilde.T
    skew[grid.n_edges :, : grid.n_edges] = ctilde
    relation = BlockRelation(
        ((0, grid.n_edges, LinearGraph(0.0)), (grid.n_edges, law.dim, scenario.Z.shifted(c))),
        skew,
    )
    current, _ = source_signal(scenario, operators)
    values = np.hstack([-current.values, np.zeros((scenario.time.n, grid.n_cells))])
    return Problem(law, relation, WeightedSignal(scenario.time, scenario.weight, values))


@attrs.frozen(eq=False)
class MaxwellDiagnostics:
    """Structural residuals of one Maxwell run.

    ``div_drift`` is the largest ``|div0 (D(σ Ẽ) + κ Ẽ + J)|`` over all steps, which the
    scheme keeps at zero since that current equals ``curl~.T H``. ``hn_component`` holds
    ``|P_N B(t)|`` per step. The energy ledger holds per-step arrays of stored energy
    increments ``<H_k, B_k - B_{k-1}>``, dissipation, source work and their balance.
    """

    div_drift: float = attrs.field()
    hn_component: NDArray = attrs.field()
    energy_ledger: dict[str, NDArray] = attrs.field()
    constitutive_distance: float = attrs.field()
    removed_source_norm: float = attrs.field()

    def violations(self, scale: float) -> list[str]:
        result = []
        if self.div_drift > 1e-10 * scale:
            result.append(f"div drift {self.div_drift:.3e}")
        if self.hn_component.max(initial=0.0) > 1e-10 * scale:
            result.append(f"harmonic component of B {self.hn_component.max():.3e}")
        return result


@attrs.frozen(eq=False)
class MaxwellRun:
    E: WeightedSignal = attrs.field()
    H: WeightedSignal = attrs.field()
    B: WeightedSignal = attrs.field()
    J: WeightedSignal = attrs.field()
    diagnostics: MaxwellDiagnostics = attrs.field()
    report: SolveReport = attrs.field()
    problem: Problem = attrs.field()


def _diagnostics(scenario, operators, law, etilde, H, B, E, J, removed) -> MaxwellDiagnostics:
    stencils = law.stencils(scenario.time)
    edges = slice(0, scenario.grid.n_edges)
    sigma = stencils["M"].table[:, edges]
    kappa = stencils["N"].table[:, edges]
    current = derivative(etilde.with_values(sigma * etilde.values)).values
    current = current + kappa * etilde.values
    div_drift = float(np.abs((current + J.values) @ operators.div0.T).max())
    hn_component = np.linalg.norm(operators.cell_projector(B.values), axis=1)
    h = scenario.time.h
    area = scenario.grid.dx * scenario.grid.dy
    previous_b = np.vstack([np.zeros((1, B.dim)), B.values[:-1]])
    stored = area * np.einsum("kc,kc->k", H.values, B.values - previous_b)
    dissipation = area * h * np.einsum("ke,ke->k", current, E.values)
    source = -area * h * np.einsum("ke,ke->k", J.values, E.values)
    distances = scenario.Z.graph_distance(H.values, B.values)
    return MaxwellDiagnostics(
        div_drift=div_drift,
        hn_component=hn_component,
        energy_ledger={
            "stored": stored,
            "dissipation": dissipation,
            "source": source,
            "balance": stored + dissipation - source,
        },
        constitutive_distance=float(np.max(distances, initial=0.0)),
        removed_source_norm=removed,
    )


def run(
    scenario: MaxwellScenario,
    tol: float = 1e-8,
    routes: str = "timestep",
    operators: MaxwellOperators | None = None,
) -> MaxwellRun:
    """Solve the Maxwell inclusion and post-process ``E = D Ẽ`` and ``B = -curl~ Ẽ``.

    A violation of the exact structural identities raises a StructuralError.
    """
    operators = build_operators(scenario.grid) if operators is None else operators
    problem = assemble_block(scenario, operators)
    J, removed = source_signal(scenario, operators)
    try:
        report = solve(problem, tol, routes=routes)
    except (ConvergenceError, HypothesisViolation):
        logger.error("Maxwell scenario on a %dx%d grid failed", scenario.grid.nx, scenario.grid.ny)
        raise
    grid = scenario.grid
    edges = slice(0, grid.n_edges)
    cells = slice(grid.n_edges, None)
    etilde = report.u.with_values(report.u.values[:, edges])
    H = report.u.with_values(report.u.values[:, cells])
    B = H.with_values(-etilde.values @ operators.ctilde.T)
    E = derivative(etilde)
    diagnostics = _diagnostics(scenario, operators, problem.law, etilde, H, B, E, J, removed)
    scale = 1 + np.abs(J.values).max()
    violations = diagnostics.violations(scale)
    if violations:
        raise StructuralError("Maxwell structure violated: " + ", ".join(violations))
    return MaxwellRun(E, H, B, J, diagnostics, report, problem)


def steady_state_oracle(scenario: MaxwellScenario, operators: MaxwellOperators | None = None):
    """Late-time H for linear media and a step source from one sparse linear solve.

    At steady state ``curl H = J`` and H is orthogonal to the constants, which is the
    bordered system ``[[curl0 curl, 1], [1.T, 0]] (H, s) = (curl0 J, 0)``.
    """
    if not isinstance(scenario.Z, LinearGraph):
        raise ContractError("The steady-state oracle needs linear media")
    if scenario.source.profile != "step":
        raise ContractError("The steady-state oracle needs a step source")
    if scenario.source.pattern == "point":
        raise ContractError("The steady-state oracle needs a divergence-free source pattern")
    operators = build_operators(scenario.grid) if operators is None else operators
    J, _ = source_signal(scenario, operators)
    ones = scipy.sparse.csr_array(np.ones((scenario.grid.n_cells, 1)))
    laplacian = operators.curl0 @ operators.curl
    system = scipy.sparse.bmat([[laplacian, ones], [ones.T, None]], format="csc")
    rhs = np.concatenate([operators.curl0 @ J.values[-1], [0.0]])
    return scipy.sparse.linalg.spsolve(system, rhs)[:-1]


@attrs.frozen
class SaturationReport:
    """Operating curves of a saturation study, one entry per amplitude."""

    amplitudes: list[float] = attrs.field()
    peak_H: list[float] = attrs.field()
    peak_B: list[float] = attrs.field()
    graph_distance: list[float] = attrs.field()
    curves: list[dict[str, list[float]]] = attrs.field()
    linearization_error: float | None = attrs.field()
    linear_slope: float = attrs.field()

    @property
    def on_graph(self) -> bool:
        return max(self.graph_distance, default=0.0) <= 1e-8


def _slope_at_origin(graph: ScalarGraph, eps: float = 1e-9) -> float:
    if isinstance(graph, LinearGraph):
        return graph.alpha
    if isinstance(graph, SoftGraph):
        return float((graph.minimal_section(eps) - graph.minimal_section(-eps)) / (2 * eps))
    raise ContractError("The linearization needs a linear or piecewise-linear graph")


def saturation_study(
    scenario: MaxwellScenario, amplitudes: list[float], tol: float = 1e-8
) -> SaturationReport:
    """Sweep the source amplitude and record H versus B in the cell with the largest |H|.

    The smallest nonzero amplitude is also run with linear media of the slope of Z at
    the origin, and the relative difference in H is reported.
    """
    operators = build_operators(scenario.grid)
    slope = _slope_at_origin(scenario.Z)
    peak_h, peak_b, distances, curves = [], [], [], []
    runs = {}
    for amplitude in amplitudes:
        source = attrs.evolve(scenario.source, amplitude=amplitude)
        result = run(scenario.with_source(source), tol, operators=operators)
        runs[amplitude] = result
        cell = int(np.argmax(np.abs(result.H.values).max(axis=0)))
        peak_h.append(float(np.abs(result.H.values).max()))
        peak_b.append(float(np.abs(result.B.values).max()))
        distances.append(result.diagnostics.constitutive_distance)
        curves.append(
            {"H": result.H.values[:, cell].tolist(), "B": result.B.values[:, cell].tolist()}
        )
        logger.info("Amplitude %g: peak H %.4g, peak B %.4g", amplitude, peak_h[-1], peak_b[-1])
    error = None
    nonzero = [a for a in amplitudes if a != 0]
    if nonzero:
        smallest = min(nonzero, key=abs)
        source = attrs.evolve(scenario.source, amplitude=smallest)
        linear = run(
            scenario.with_source(source).with_Z(LinearGraph(slope)), tol, operators=operators
        )
        reference = np.abs(linear.H.values).max()
        error = float(np.abs(runs[smallest].H.values - linear.H.values).max() / reference)
    return SaturationReport(
        amplitudes=list(amplitudes),
        peak_H=peak_h,
        peak_B=peak_b,
        graph_distance=distances,
        curves=curves,
        linearization_error=error,
        linear_slope=slope,
    )
