"""
Global RBF-FD operators on a node set, the pure-Neumann Poisson solver and
the repeated Helmholtz-Hodge decomposition used as a stability check.

Unknowns live on interior nodes only. A stencil with boundary members
contributes its Neumann weights to a separate boundary matrix Q, so that
L u_I + Q g approximates the operator at every interior node.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from config import DEFAULT_WORKERS, DIVERGENT_GROWTH, HHD_ITERATIONS, STABLE_GROWTH
from exceptions import ConditioningError, NumericalError, SolverError
from geometry import Domain2D, build_stencils, generate_nodes
from interp import DiffOperator, assemble, stencil_weights
from kernels import KernelSpec, PolyBasis
from models.nodes import NodeSet, Stencil
from stabilize import SelectionConfig, project_boundary_nodes, select_boundary_nodes

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AssemblyReport:
    """Per-row bookkeeping of one global assembly."""

    removed: np.ndarray
    skipped: Tuple[int, ...] = ()
    max_kappa: float = 0.0

    @property
    def total_removed(self) -> int:
        return int(self.removed.sum())


@dataclass(frozen=True, eq=False)
class GlobalSystem:
    L: sp.csr_matrix
    q_contrib: sp.csr_matrix
    f: np.ndarray
    interior: np.ndarray
    boundary: np.ndarray
    stencils: Tuple[Stencil, ...]
    report: AssemblyReport
    projected: bool = False

    @property
    def n_interior(self) -> int:
        return self.L.shape[0]

    def boundary_term(self, g: Optional[np.ndarray]) -> np.ndarray:
        if g is None:
            return np.zeros(self.n_interior)
        return self.q_contrib @ np.asarray(g, dtype=float)

    def with_rhs(self, f: np.ndarray) -> 'GlobalSystem':
        f = np.asarray(f, dtype=float)
        if f.shape != (self.n_interior,):
            raise ValueError(f"right-hand side needs {self.n_interior} entries, got {f.shape}")
        return replace(self, f=f)


class _Row(NamedTuple):
    stencil: Stencil
    weights: np.ndarray
    removed: int
    kappa: float
    skipped: bool


@dataclass(eq=False)
class HhdState:
    u: np.ndarray
    iteration: int = 0
    div_norm_history: List[float] = field(default_factory=list)
    sup_norm_history: List[float] = field(default_factory=list)
    w_sup: float = 0.0


@dataclass(frozen=True)
class StabilityVerdict:
    label: str
    growth: float

    @property
    def stable(self) -> bool:
        return self.label == 'stable'


@dataclass(frozen=True, eq=False)
class Discretization:
    nodes: NodeSet
    stencils: Tuple[Stencil, ...]
    projected: bool = False
    origin: Tuple[float, float] = (0.0, 0.0)


def _map(function: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1:
        return [function(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(function, items))


def stabilized_stencils(nodes: NodeSet, stencils: Sequence[Stencil], kernel: KernelSpec,
                        stabilization: Optional[SelectionConfig],
                        workers: int = DEFAULT_WORKERS) -> List[Tuple[Stencil, int]]:
    """Run node selection on every stencil; (stencil, removed) pairs in input order."""
    if stabilization is None:
        return [(stencil, 0) for stencil in stencils]

    def select(stencil: Stencil) -> Tuple[Stencil, int]:
        if stencil.m_boundary == 0:
            return stencil, 0
        return tuple(select_boundary_nodes(stencil, nodes, kernel, stabilization))

    return _map(select, stencils, workers)


def assemble_global(nodes: NodeSet, stencils: Sequence[Stencil], op: DiffOperator, kernel: KernelSpec,
                    basis: PolyBasis, stabilization: Optional[SelectionConfig] = None,
                    projected: bool = False, skip_singular: bool = False,
                    workers: int = DEFAULT_WORKERS) -> GlobalSystem:
    """
    Evaluate `op` at every stencil center and scatter the weights.

    With skip_singular, a stencil whose local system fails is replaced by
    its interior-only stencil and reported; otherwise the failure
    propagates with the center index. `projected` records whether the node
    set came from boundary projection.
    """
    interior = nodes.interior_indices
    boundary = nodes.boundary_indices
    if len(stencils) != len(interior):
        raise ValueError(f"expected one stencil per interior node ({len(interior)}), got {len(stencils)}")

    def row(stencil: Stencil) -> _Row:
        center = nodes.positions[stencil.center]
        removed = 0
        try:
            if stabilization is not None and stencil.m_boundary:
                stencil, removed = select_boundary_nodes(stencil, nodes, kernel, stabilization)
            system = assemble(stencil, nodes, kernel, basis)
            weights = stencil_weights(system, op, center)
            return _Row(stencil, weights.weights, removed, 1.0 / system.rcond, False)
        except NumericalError as exc:
            if not skip_singular:
                if isinstance(exc, ConditioningError) and exc.node is None:
                    raise ConditioningError(exc.kappa, stencil.center) from exc
                raise
            logger.warning("stencil %d: %s; using its interior nodes only", stencil.center, exc)
            fallback = stencil.interior_only()
            system = assemble(fallback, nodes, kernel, basis)
            weights = stencil_weights(system, op, center)
            return _Row(fallback, weights.weights, removed, 1.0 / system.rcond, True)

    rows = _map(row, stencils, workers)

    interior_col = np.full(len(nodes), -1)
    interior_col[interior] = np.arange(len(interior))
    boundary_col = np.full(len(nodes), -1)
    boundary_col[boundary] = np.arange(len(boundary))

    l_rows, l_cols, l_vals = [], [], []
    q_rows, q_cols, q_vals = [], [], []
    for index, (stencil, weights, _, _, _) in enumerate(rows):
        m_i = stencil.m_interior
        l_rows.append(np.full(m_i, index))
        l_cols.append(interior_col[list(stencil.interior)])
        l_vals.append(weights[:m_i])
        if stencil.m_boundary:
            q_rows.append(np.full(stencil.m_boundary, index))
            q_cols.append(boundary_col[list(stencil.boundary)])
            q_vals.append(weights[m_i:])

    def matrix(r, c, v, cols):
        if not r:
            return sp.csr_matrix((len(interior), cols))
        return sp.csr_matrix((np.concatenate(v), (np.concatenate(r), np.concatenate(c))),
                             shape=(len(interior), cols))

    report = AssemblyReport(
        removed=np.array([r.removed for r in rows], dtype=int),
        skipped=tuple(r.stencil.center for r in rows if r.skipped),
        max_kappa=max(r.kappa for r in rows),
    )
    if report.skipped:
        logger.warning("%d singular stencil(s) fell back to interior nodes", len(report.skipped))
    logger.debug("assembled %d rows, %d boundary nodes removed, max local kappa %.3e",
                 len(rows), report.total_removed, report.max_kappa)
    return GlobalSystem(
        L=matrix(l_rows, l_cols, l_vals, len(interior)),
        q_contrib=matrix(q_rows, q_cols, q_vals, len(boundary)),
        f=np.zeros(len(interior)),
        interior=interior,
        boundary=boundary,
        stencils=tuple(r.stencil for r in rows),
        report=report,
        projected=projected,
    )


class NeumannPoissonSolver:
    """
    Sparse LU of the bordered matrix [[L, 1], [1^T, 0]], factored once.

    The multiplier row fixes the zero-mean gauge of the pure-Neumann
    problem; the multiplier absorbs the incompatible part of the data.
    """

    def __init__(self, system: GlobalSystem):
        self.system = system
        n = system.n_interior
        ones = sp.csr_matrix(np.ones((n, 1)))
        bordered = sp.bmat([[system.L, ones], [ones.T, None]], format='csc')
        try:
            self._lu = splu(bordered)
        except RuntimeError as exc:
            raise SolverError(f"bordered Laplacian factorization failed: {exc}") from exc

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        n = self.system.n_interior
        solution = self._lu.solve(np.append(np.asarray(rhs, dtype=float), 0.0))
        if not np.all(np.isfinite(solution)):
            raise SolverError("bordered solve produced non-finite values")
        return solution[:n]


def solve_poisson_neumann(system: GlobalSystem, g: Optional[np.ndarray] = None,
                          solver: Optional[NeumannPoissonSolver] = None) -> np.ndarray:
    """Zero-mean u with L u + Q g = f."""
    solver = solver or NeumannPoissonSolver(system)
    return solver.solve(system.f - system.boundary_term(g))


@dataclass(frozen=True, eq=False)
class HhdOperators:
    solver: NeumannPoissonSolver
    grad_x: sp.csr_matrix
    grad_y: sp.csr_matrix
    div_x: sp.csr_matrix
    div_y: sp.csr_matrix
    report: AssemblyReport


def hhd_operators(nodes: NodeSet, stencils: Sequence[Stencil], kernel: KernelSpec, basis: PolyBasis,
                  stabilization: Optional[SelectionConfig] = None, skip_singular: bool = False,
                  workers: int = DEFAULT_WORKERS) -> HhdOperators:
    """
    Laplacian and gradient on the (stabilized) Neumann stencils for phi,
    first derivatives on interior-only stencils for the velocity.
    """
    selected = stabilized_stencils(nodes, stencils, kernel, stabilization, workers)
    neumann = [stencil for stencil, _ in selected]
    removed = np.array([count for _, count in selected], dtype=int)
    inner = [stencil.interior_only() for stencil in stencils]

    def build(op, chosen):
        return assemble_global(nodes, chosen, op, kernel, basis, skip_singular=skip_singular, workers=workers)

    laplacian = build(DiffOperator.laplacian(), neumann)
    grad_x = build(DiffOperator.partial(0), laplacian.stencils)
    grad_y = build(DiffOperator.partial(1), laplacian.stencils)
    div_x = build(DiffOperator.partial(0), inner)
    div_y = build(DiffOperator.partial(1), inner)
    report = replace(laplacian.report, removed=removed)
    return HhdOperators(NeumannPoissonSolver(laplacian), grad_x.L, grad_y.L, div_x.L, div_y.L, report)


def sup_norm(u: np.ndarray) -> float:
    """max over nodes of the Euclidean length of the vector field."""
    return float(np.max(np.linalg.norm(u, axis=1)))


def hhd_iterate(nodes: NodeSet, stencils: Sequence[Stencil], kernel: KernelSpec, basis: PolyBasis,
                stabilization: Optional[SelectionConfig], w: np.ndarray, n_iter: int = HHD_ITERATIONS,
                operators: Optional[HhdOperators] = None, skip_singular: bool = False,
                workers: int = DEFAULT_WORKERS) -> HhdState:
    """
    Repeated Helmholtz-Hodge projection u <- u - grad(phi), lap(phi) = div(u),
    dphi/dn = 0. Stops early once the field stops being finite.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (nodes.n_interior, nodes.dimension):
        raise ValueError(f"initial field needs shape {(nodes.n_interior, nodes.dimension)}, got {w.shape}")
    ops = operators or hhd_operators(nodes, stencils, kernel, basis, stabilization, skip_singular, workers)
    state = HhdState(u=w.copy(), w_sup=sup_norm(w))

    with np.errstate(over='ignore', invalid='ignore'):
        for _ in range(n_iter):
            div = ops.div_x @ state.u[:, 0] + ops.div_y @ state.u[:, 1]
            if not np.all(np.isfinite(div)):
                state.div_norm_history.append(np.inf)
                state.sup_norm_history.append(np.inf)
                state.iteration += 1
                logger.info("HHD field overflowed at iteration %d", state.iteration)
                break
            potential = ops.solver.solve(div)
            state.u = state.u - np.column_stack([ops.grad_x @ potential, ops.grad_y @ potential])
            state.div_norm_history.append(float(np.linalg.norm(div)))
            state.sup_norm_history.append(sup_norm(state.u))
            state.iteration += 1
    return state


def classify_stability(state: HhdState) -> StabilityVerdict:
    """stable: max |u| <= 10 |w|; divergent: above 10^3 |w| or non-finite; unstable in between."""
    if not state.sup_norm_history:
        return StabilityVerdict('stable', 1.0)
    peak = max(state.sup_norm_history)
    growth = peak / state.w_sup if state.w_sup > 0 else (0.0 if peak == 0 else np.inf)
    if not np.isfinite(growth) or growth > DIVERGENT_GROWTH:
        return StabilityVerdict('divergent', float(growth))
    if growth <= STABLE_GROWTH:
        return StabilityVerdict('stable', float(growth))
    return StabilityVerdict('unstable', float(growth))


def nrmse(u_h: np.ndarray, u_exact: np.ndarray) -> float:
    """RMS of the mean-aligned error over the range of the exact field."""
    u_h = np.asarray(u_h, dtype=float)
    u_exact = np.asarray(u_exact, dtype=float)
    if u_h.shape != u_exact.shape:
        raise ValueError(f"field lengths differ: {u_h.shape} and {u_exact.shape}")
    spread = float(np.max(u_exact) - np.min(u_exact))
    if spread == 0.0:
        raise ValueError("exact field is constant")
    error = u_h - u_exact
    error -= error.mean()
    return float(np.sqrt(np.mean(error ** 2)) / spread)


def inverse_radius(points: np.ndarray, origin=(0.0, 0.0)) -> np.ndarray:
    return 1.0 / np.linalg.norm(np.atleast_2d(points) - origin, axis=1)


def inverse_radius_source(points: np.ndarray, origin=(0.0, 0.0)) -> np.ndarray:
    """Laplacian of 1/r in the plane, r^-3."""
    return np.linalg.norm(np.atleast_2d(points) - origin, axis=1) ** -3


def inverse_radius_flux(points: np.ndarray, normals: np.ndarray, origin=(0.0, 0.0)) -> np.ndarray:
    """Normal derivative of 1/r, -(x . n) / r^3."""
    points = np.atleast_2d(points) - origin
    r = np.linalg.norm(points, axis=1)
    return -np.sum(points * normals, axis=1) / r ** 3


def vortex_field(points: np.ndarray, origin=(0.0, 0.0)) -> np.ndarray:
    """Irrotational vortex about `origin`, tangential speed 1/r."""
    points = np.atleast_2d(points) - origin
    r2 = np.sum(points ** 2, axis=1)
    return np.column_stack([-points[:, 1], points[:, 0]]) / r2[:, None]


def field_origin(domain: Domain2D) -> Tuple[float, float]:
    """Singular point of the r^-1 test fields, two units left of the domain center."""
    return (domain.center[0] - 2.0, domain.center[1])


def discretize(domain: Domain2D, spacing: float, m_interior: int, projected: bool = False) -> Discretization:
    """Generated (and optionally projected) nodes with one stencil per interior node."""
    nodes = generate_nodes(domain, spacing)
    if projected:
        nodes = project_boundary_nodes(nodes, domain)
        logger.info("projected boundary: %d nodes", nodes.n_boundary)
    return Discretization(nodes, tuple(build_stencils(nodes, m_interior)), projected, field_origin(domain))


def solve_manufactured_poisson(disc: Discretization, kernel: KernelSpec, basis: PolyBasis,
                               stabilization: Optional[SelectionConfig] = None, skip_singular: bool = False,
                               workers: int = DEFAULT_WORKERS) -> Tuple[np.ndarray, np.ndarray, float]:
    """Solve lap u = r^-3 with the Neumann data of u = 1/r; returns (u_h, exact, nrmse)."""
    nodes = disc.nodes
    system = assemble_global(nodes, disc.stencils, DiffOperator.laplacian(), kernel, basis,
                             stabilization, disc.projected, skip_singular, workers)
    interior = nodes.positions[system.interior]
    boundary = nodes.positions[system.boundary]
    origin = np.asarray(disc.origin)
    system = system.with_rhs(inverse_radius_source(interior, origin))
    g = inverse_radius_flux(boundary, nodes.normals[system.boundary], origin)
    u_h = solve_poisson_neumann(system, g)
    exact = inverse_radius(interior, origin)
    return u_h, exact, nrmse(u_h, exact)
