"""
Stabilization of Neumann stencils.

Approach 1 drops boundary nodes whose normals are far from the optimal
directions. Approach 2 rebuilds the boundary by projecting the first layer
of interior nodes onto the boundary. The position optimization moves
boundary nodes along the boundary to minimize the interior Lebesgue
function summed over the boundary nodes.
"""

import logging
from dataclasses import dataclass, field
from typing import List, NamedTuple, Tuple

import numpy as np

from config import DEDUP_RADIUS, FIRST_LAYER_DEPTH, MERGE_RADIUS, ON_BOUNDARY_DEPTH
from exceptions import NumericalError, ProjectionError
from geometry import REFERENCE_CENTER, ReferenceBoundary, reference_stencil
from interp import DiffOperator, assemble_local
from kernels import KernelSpec, PolyBasis, gradient_field, hessian_field
from models.nodes import NodeSet, Stencil
from optdir import optimal_directions, schur_data

logger = logging.getLogger(__name__)

# Scores within this gap of the worst are removed together
TIE_TOLERANCE = 1e-8

NO_POLY = PolyBasis(-1)


@dataclass(frozen=True)
class SelectionConfig:
    d_min: float
    recompute: bool = True

    def __post_init__(self):
        if not 0.0 <= self.d_min <= 1.0:
            raise ValueError(f"d_min must lie in [0, 1], got {self.d_min}")
        if not self.recompute:
            raise ValueError("optimal directions are always recomputed after a removal")


class Selection(NamedTuple):
    stencil: Stencil
    removed: int


@dataclass(frozen=True, eq=False)
class PositionResult:
    nodes: NodeSet
    stencil: Stencil
    history: List[float] = field(default_factory=list)
    merged: int = 0


def select_boundary_nodes(stencil: Stencil, nodes: NodeSet, kernel: KernelSpec,
                          cfg: SelectionConfig) -> Selection:
    """
    Remove the boundary node with the worst |n_bar . n_hat| while it is
    below d_min, recomputing the optimal directions after every removal.
    Nodes whose scores lie within TIE_TOLERANCE of the worst are removed
    together: mirror-image nodes of a symmetric stencil have equal scores,
    and removing them in pairs is what keeps the removed count even on
    symmetric stencils; removing one node at a time leaves odd counts at
    some angles of the reference sweep.
    """
    if stencil.m_boundary == 0 or cfg.d_min == 0.0:
        return Selection(stencil, 0)
    data = schur_data(stencil, nodes, kernel)
    actual = stencil.boundary_normals(nodes)
    keep = list(range(stencil.m_boundary))

    while keep:
        result = optimal_directions(data.restricted(keep))
        scores = np.abs(np.sum(actual[keep] * result.directions, axis=1))
        worst = float(scores.min())
        if worst >= cfg.d_min:
            break
        dropped = {keep[j] for j in np.flatnonzero(scores <= worst + TIE_TOLERANCE)}
        keep = [k for k in keep if k not in dropped]

    removed = stencil.m_boundary - len(keep)
    if removed:
        logger.debug("stencil %d: removed %d of %d boundary nodes", stencil.center, removed, stencil.m_boundary)
    return Selection(stencil.keep_boundary(keep), removed)


def project_boundary_nodes(nodes: NodeSet, boundary) -> NodeSet:
    """
    Replace the boundary nodes by the feet of the first-layer interior nodes.

    `boundary` answers closest_points(points) -> (feet, normals, distances),
    as Domain2D and ReferenceBoundary do. Feet closer than 0.5 s to an
    already placed foot are dropped, nearest source nodes first. Interior
    nodes within 0.1 s of the boundary are removed: their feet take their
    place.
    """
    spacing = nodes.spacing
    interior = nodes.positions[nodes.interior_indices]
    feet, normals, distance = boundary.closest_points(interior)
    first = np.flatnonzero(distance < FIRST_LAYER_DEPTH * spacing)
    if len(first) == 0:
        raise ProjectionError("no interior node lies within the first layer")

    order = first[np.argsort(distance[first], kind='stable')]
    placed: List[int] = []
    for candidate in order:
        if placed and np.min(np.linalg.norm(feet[placed] - feet[candidate], axis=1)) < DEDUP_RADIUS * spacing:
            continue
        placed.append(candidate)
    dropped = len(order) - len(placed)
    if dropped:
        logger.debug("projection dropped %d of %d feet", dropped, len(order))

    on_boundary = distance < ON_BOUNDARY_DEPTH * spacing
    if on_boundary.any():
        logger.debug("projection absorbed %d interior nodes lying on the boundary", int(on_boundary.sum()))
    placed = sorted(placed)
    return NodeSet.from_parts(interior[~on_boundary], feet[placed], normals[placed], spacing)


def project_reference_stencil(alpha: float, spacing: float = 1.0) -> Tuple[NodeSet, Stencil, ReferenceBoundary]:
    """Reference stencil with its boundary rebuilt by projection."""
    nodes, stencil = reference_stencil(alpha, spacing)
    boundary = ReferenceBoundary(alpha, spacing)
    projected = project_boundary_nodes(nodes, boundary)
    n_i = projected.n_interior
    center = np.flatnonzero(np.all(projected.positions[:n_i] == nodes.positions[REFERENCE_CENTER], axis=1))
    if len(center) == 0:
        raise ProjectionError(f"alpha={alpha:.6f}: the stencil center lies on the boundary")
    return projected, Stencil(int(center[0]), tuple(range(n_i)), tuple(range(n_i, len(projected)))), boundary


def lebesgue_cost_and_gradient(points_interior: np.ndarray, points_boundary: np.ndarray,
                               normals: np.ndarray, kernel: KernelSpec) -> Tuple[float, np.ndarray]:
    """
    F = sum over boundary nodes x_k of sum_i |psi_i(x_k)| (interior cardinal
    functions, no polynomial tail), and dF/dx_b for every boundary node.

    Uses one adjoint solve M c_k = sgn(psi_I(x_k)) per boundary node; the
    normals are held fixed.
    """
    system = assemble_local(points_interior, points_boundary, normals, kernel, NO_POLY)
    pts, m_i = system.points, system.m_interior
    pb = pts[m_i:]
    psi = system.solve(system.rhs(DiffOperator.identity(), pb), transpose=True)
    cost = float(np.sum(np.abs(psi[:m_i])))

    signs = np.zeros_like(psi)
    signs[:m_i] = np.sign(psi[:m_i])
    c = system.solve(signs)

    grad = np.zeros_like(pb)
    for jb in range(len(pb)):
        b = m_i + jb
        xb = pts[b]
        # rows: grad/hess of Phi(|x - x_i|) evaluated at x = xb for every center i
        grads = gradient_field(kernel, xb - pts)
        hessians = hessian_field(kernel, xb - pts)

        # eval point x_b moves
        total = grads.T @ c[:, jb]
        # center x_b moves in phi(x_k)
        total += np.einsum('k,kd->d', c[b], grads[m_i:])

        # psi^T dM c: column b of interior rows
        dm = -np.einsum('k,rk,rd->d', c[b], psi[:m_i], -grads[:m_i])
        # row b of boundary rows; M[b, b] = 0 does not move
        row_hessians = hessians.copy()
        row_hessians[b] = 0.0
        dm += np.einsum('k,ik,ide,e->d', psi[b], c, row_hessians, system.normals[jb])
        # column b of the other boundary rows
        others = [k for k in range(len(pb)) if k != jb]
        if others:
            rows = [m_i + k for k in others]
            dm -= np.einsum('k,jk,jde,je->d', c[b], psi[rows], hessians[rows], system.normals[others])
        grad[jb] = total - dm
    return cost, grad


def _candidate(positions: np.ndarray, normals: np.ndarray, boundary) -> Tuple[np.ndarray, np.ndarray]:
    if boundary is None:
        return positions, normals
    feet, new_normals, _ = boundary.closest_points(positions)
    return feet, new_normals


def _merge_pass(points_interior, positions, normals, kernel, boundary, spacing, cost):
    """Collapse pairs closer than the merge radius to their midpoint when F does not grow."""
    merged = 0
    while len(positions) > 1:
        gaps = np.linalg.norm(positions[:, None] - positions[None, :], axis=-1)
        gaps[np.diag_indices(len(positions))] = np.inf
        a, b = np.unravel_index(np.argmin(gaps), gaps.shape)
        if gaps[a, b] >= MERGE_RADIUS * spacing:
            break
        a, b = min(a, b), max(a, b)
        keep = [k for k in range(len(positions)) if k != b]
        trial = positions[keep].copy()
        trial_normals = normals[keep].copy()
        mid, mid_normal = _candidate(0.5 * (positions[a] + positions[b])[None, :],
                                     normals[a][None, :], boundary)
        trial[keep.index(a)] = mid[0]
        trial_normals[keep.index(a)] = mid_normal[0]
        try:
            trial_cost, _ = lebesgue_cost_and_gradient(points_interior, trial, trial_normals, kernel)
        except NumericalError:
            break
        if trial_cost > cost:
            break
        positions, normals, cost = trial, trial_normals, trial_cost
        merged += 1
    return positions, normals, cost, merged


def optimize_boundary_positions(stencil: Stencil, nodes: NodeSet, kernel: KernelSpec,
                                step: float = 0.01, max_iter: int = 200, boundary=None,
                                tol: float = 1e-6) -> PositionResult:
    """
    Gradient descent of the boundary Lebesgue cost over boundary positions.

    Each node moves against the tangential part of s * dF/dx, scaled by
    step * s; the step is halved until F does not increase. When `boundary`
    is given, moved nodes are put back on it and take its normals; without
    it, normals stay fixed. Nodes closer than 0.25 s are merged. Stops when
    |dF| < tol * F or after max_iter steps.
    """
    if stencil.m_boundary == 0:
        raise ValueError("position optimization needs at least one boundary node")
    stencil.validate(nodes)
    s = nodes.spacing
    points_interior = nodes.positions[list(stencil.interior)]
    positions = nodes.positions[list(stencil.boundary)].copy()
    normals = stencil.boundary_normals(nodes).copy()

    cost, grad = lebesgue_cost_and_gradient(points_interior, positions, normals, kernel)
    history = [cost]
    merged = 0
    trial_step = step
    for _ in range(max_iter):
        tangential = grad - np.sum(grad * normals, axis=1)[:, None] * normals
        accepted = None
        while trial_step > step * 2.0 ** -30:
            moved, moved_normals = _candidate(positions - trial_step * s * s * tangential, normals, boundary)
            try:
                new_cost, new_grad = lebesgue_cost_and_gradient(points_interior, moved, moved_normals, kernel)
            except NumericalError:
                trial_step *= 0.5
                continue
            if new_cost <= cost:
                accepted = moved, moved_normals, new_cost, new_grad
                break
            trial_step *= 0.5
        if accepted is None:
            break

        previous = cost
        positions, normals, cost, grad = accepted
        positions, normals, merged_cost, count = _merge_pass(points_interior, positions, normals,
                                                             kernel, boundary, s, cost)
        if count:
            logger.info("merged %d boundary node(s)", count)
            merged += count
            cost = merged_cost
            _, grad = lebesgue_cost_and_gradient(points_interior, positions, normals, kernel)
        history.append(cost)
        trial_step = min(2.0 * trial_step, step)
        if abs(previous - cost) < tol * cost:
            break

    n_i = len(points_interior)
    optimized = NodeSet.from_parts(points_interior, positions, normals, s)
    center = list(stencil.interior).index(stencil.center) if stencil.center in stencil.interior else 0
    new_stencil = Stencil(center, tuple(range(n_i)), tuple(range(n_i, n_i + len(positions))))
    return PositionResult(optimized, new_stencil, history, merged)


def optimize_reference_stencil(alpha: float, kernel: KernelSpec, spacing: float = 1.0,
                               step: float = 0.01, max_iter: int = 200) -> PositionResult:
    nodes, stencil = reference_stencil(alpha, spacing)
    return optimize_boundary_positions(stencil, nodes, kernel, step, max_iter,
                                       boundary=ReferenceBoundary(alpha, spacing))
