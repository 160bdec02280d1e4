"""
Local RBF interpolation systems with Neumann rows and polynomial augmentation.

The local matrix has the block layout

    M = [ phi_BC  P_BC ]
        [ P^T     0    ]

Interior rows hold phi_i(x_r). Boundary rows hold the normal derivative
Phi'(r) e . n_k of every basis function at the boundary node. Stencil
weights and cardinal functions come from the adjoint system M^T c = rhs.

Monomials are evaluated in coordinates shifted to the stencil centroid and
scaled by the stencil radius. This changes only the conditioning of M,
not the interpolant.
"""

import logging
import warnings
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgWarning, get_lapack_funcs, lu_factor, lu_solve, svdvals
from scipy.spatial import Delaunay, QhullError

from config import LEBESGUE_GRID, SINGULAR_RCOND
from exceptions import ConditioningError, SingularAssemblyError
from kernels import KernelSpec, PolyBasis, gradient_field, laplacian_field, phi
from models.nodes import NodeSet, Stencil

logger = logging.getLogger(__name__)


class OperatorKind(str, Enum):
    IDENTITY = 'identity'
    PARTIAL = 'partial'
    LAPLACIAN = 'laplacian'
    NORMAL = 'normal'


@dataclass(frozen=True)
class DiffOperator:
    """A linear differential operator applied to basis functions."""

    kind: OperatorKind
    axis: int = 0
    direction: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.kind == OperatorKind.NORMAL:
            if self.direction is None:
                raise ValueError("normal derivative needs a direction")
            if abs(np.linalg.norm(self.direction) - 1.0) > 1e-12:
                raise ValueError("normal derivative direction must be a unit vector")

    @classmethod
    def identity(cls) -> 'DiffOperator':
        return cls(OperatorKind.IDENTITY)

    @classmethod
    def partial(cls, axis: int) -> 'DiffOperator':
        return cls(OperatorKind.PARTIAL, axis=axis)

    @classmethod
    def laplacian(cls) -> 'DiffOperator':
        return cls(OperatorKind.LAPLACIAN)

    @classmethod
    def normal_derivative(cls, direction) -> 'DiffOperator':
        return cls(OperatorKind.NORMAL, direction=tuple(float(c) for c in direction))

    def apply_rbf(self, kernel: KernelSpec, diffs: np.ndarray) -> np.ndarray:
        """Operator applied to Phi(|x - c|), given differences x - c on the last axis."""
        if self.kind == OperatorKind.IDENTITY:
            return phi(kernel, np.linalg.norm(diffs, axis=-1))
        if self.kind == OperatorKind.LAPLACIAN:
            return laplacian_field(kernel, diffs)
        grad = gradient_field(kernel, diffs)
        if self.kind == OperatorKind.PARTIAL:
            return grad[..., self.axis]
        return grad @ np.asarray(self.direction)

    def apply_poly(self, basis: PolyBasis, local: np.ndarray, scale: float) -> np.ndarray:
        """Operator applied to the monomials at scaled local coordinates, shape (n, q)."""
        if self.kind == OperatorKind.IDENTITY:
            return basis.values(local)
        if self.kind == OperatorKind.LAPLACIAN:
            return basis.laplacians(local) / scale ** 2
        grad = basis.gradients(local) / scale
        if self.kind == OperatorKind.PARTIAL:
            return grad[:, :, self.axis]
        return grad @ np.asarray(self.direction)


@dataclass(frozen=True, eq=False)
class StencilSystem:
    """An assembled local interpolation matrix and the data it came from."""

    points: np.ndarray
    normals: np.ndarray
    m_interior: int
    kernel: KernelSpec
    basis: PolyBasis
    matrix: np.ndarray
    origin: np.ndarray
    scale: float
    stencil: Optional[Stencil] = None

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def m_boundary(self) -> int:
        return self.m - self.m_interior

    @property
    def q(self) -> int:
        return self.basis.size

    def local(self, x: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(x) - self.origin) / self.scale

    @cached_property
    def _factorization(self):
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', LinAlgWarning)
            with np.errstate(all='ignore'):
                lu, piv = lu_factor(self.matrix, check_finite=False)
                gecon, = get_lapack_funcs(('gecon',), (lu,))
                anorm = np.linalg.norm(self.matrix, 1)
                rcond, _ = gecon(lu, anorm, norm='1')
        if not np.isfinite(rcond) or not np.all(np.isfinite(lu)):
            rcond = 0.0
        return lu, piv, float(rcond)

    @property
    def rcond(self) -> float:
        """Reciprocal 1-norm condition estimate of M."""
        return self._factorization[2]

    def _checked(self):
        lu, piv, rcond = self._factorization
        if rcond < SINGULAR_RCOND:
            kappa = np.inf if rcond == 0 else 1.0 / rcond
            raise ConditioningError(kappa, None if self.stencil is None else self.stencil.center)
        return lu, piv

    def solve(self, rhs: np.ndarray, transpose: bool = False) -> np.ndarray:
        lu, piv = self._checked()
        return lu_solve((lu, piv), rhs, trans=1 if transpose else 0, check_finite=False)

    def rhs(self, op: DiffOperator, points: np.ndarray) -> np.ndarray:
        """[Psi(x); Pi(x)] for every evaluation point, shape (m + q, n)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        diffs = points[None, :, :] - self.points[:, None, :]
        rbf = op.apply_rbf(self.kernel, diffs)
        poly = op.apply_poly(self.basis, self.local(points), self.scale).T
        return np.vstack([rbf, poly])


@dataclass(frozen=True, eq=False)
class StencilWeights:
    weights: np.ndarray
    tail: np.ndarray
    eval_point: np.ndarray
    m_interior: int

    @property
    def interior(self) -> np.ndarray:
        return self.weights[:self.m_interior]

    @property
    def boundary(self) -> np.ndarray:
        return self.weights[self.m_interior:]


@dataclass(frozen=True)
class LebesgueConstants:
    interior: float
    boundary: float
    sobolev: float


def assemble_local(points_interior: np.ndarray, points_boundary: np.ndarray, normals: np.ndarray,
                   kernel: KernelSpec, basis: PolyBasis, stencil: Optional[Stencil] = None) -> StencilSystem:
    """Assemble M from explicit coordinates (interior first, then boundary)."""
    d = basis.dimension
    points_interior = np.asarray(points_interior, dtype=float).reshape(-1, d)
    points_boundary = np.asarray(points_boundary, dtype=float).reshape(-1, d)
    normals = np.asarray(normals, dtype=float).reshape(-1, d)
    if len(normals) != len(points_boundary):
        raise ValueError("one normal per boundary node is required")
    points = np.vstack([points_interior, points_boundary])
    m_i, m = len(points_interior), len(points)
    if m == 0:
        raise ValueError("empty stencil")

    origin = points.mean(axis=0)
    scale = float(np.max(np.linalg.norm(points - origin, axis=1)))
    if scale == 0.0:
        scale = 1.0

    diffs = points[:, None, :] - points[None, :, :]
    dist = np.linalg.norm(diffs, axis=-1)
    if m > 1 and np.min(dist[~np.eye(m, dtype=bool)]) <= 1e-9 * scale:
        raise SingularAssemblyError("stencil contains coincident nodes")

    q = basis.size
    matrix = np.zeros((m + q, m + q))
    matrix[:m_i, :m] = phi(kernel, dist[:m_i])
    if m > m_i:
        grads = gradient_field(kernel, diffs[m_i:])
        matrix[m_i:m, :m] = np.einsum('kid,kd->ki', grads, normals)
    if q:
        local = (points - origin) / scale
        matrix[:m_i, m:] = basis.values(local[:m_i])
        if m > m_i:
            matrix[m_i:m, m:] = np.einsum('kjd,kd->kj', basis.gradients(local[m_i:]), normals) / scale
        matrix[m:, :m] = basis.values(local).T

    matrix.setflags(write=False)
    return StencilSystem(points, normals, m_i, kernel, basis, matrix, origin, scale, stencil)


def assemble(stencil: Stencil, nodes: NodeSet, kernel: KernelSpec, basis: PolyBasis) -> StencilSystem:
    stencil.validate(nodes)
    return assemble_local(
        nodes.positions[list(stencil.interior)],
        nodes.positions[list(stencil.boundary)],
        stencil.boundary_normals(nodes),
        kernel, basis, stencil,
    )


def stencil_weights(system: StencilSystem, op: DiffOperator, x) -> StencilWeights:
    """Weights c with (L u)(x) ~ c . [u(x_i); du/dn(x_k)], from M^T c = [Psi(x); Pi(x)]."""
    x = np.asarray(x, dtype=float)
    c = system.solve(system.rhs(op, x)[:, 0], transpose=True)
    return StencilWeights(c[:system.m], c[system.m:], x, system.m_interior)


def cardinal_matrix(system: StencilSystem, points: np.ndarray,
                    op: Optional[DiffOperator] = None) -> np.ndarray:
    """Cardinal functions (or their derivatives) at many points, shape (n, m)."""
    op = op or DiffOperator.identity()
    solution = system.solve(system.rhs(op, points), transpose=True)
    return solution[:system.m].T


def cardinal_functions(system: StencilSystem, x) -> np.ndarray:
    return cardinal_matrix(system, np.atleast_2d(x))[0]


def solve_interpolant(system: StencilSystem, data: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Forward solve M [alpha; beta] = [data; 0]."""
    rhs = np.concatenate([np.asarray(data, dtype=float), np.zeros(system.q)])
    solution = system.solve(rhs)
    return solution[:system.m], solution[system.m:]


def hull_samples(points: np.ndarray, resolution: int) -> np.ndarray:
    """Grid points of the bounding box that fall inside the convex hull, plus the nodes."""
    points = np.asarray(points, dtype=float)
    if len(points) == 1:
        return points.copy()
    try:
        hull = Delaunay(points)
    except QhullError:
        # collinear stencil: sample the segment between its extreme nodes
        direction = points[-1] - points[0]
        t = (points - points[0]) @ direction
        start, stop = points[np.argmin(t)], points[np.argmax(t)]
        steps = np.linspace(0.0, 1.0, resolution)[:, None]
        return np.vstack([start + steps * (stop - start), points])
    lo, hi = points.min(axis=0), points.max(axis=0)
    axes = [np.linspace(a, b, resolution) for a, b in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1).reshape(-1, points.shape[1])
    inside = grid[hull.find_simplex(grid) >= 0]
    return np.vstack([inside, points])


def lebesgue(system: StencilSystem, grid_resolution: int = LEBESGUE_GRID) -> LebesgueConstants:
    """Sampled Lebesgue constants Lambda_I, Lambda_B and the W^{1,inf} constant Lambda_m."""
    samples = hull_samples(system.points, grid_resolution)
    m_i = system.m_interior

    def maxima(psi: np.ndarray) -> Tuple[float, float]:
        lam_i = float(np.max(np.sum(np.abs(psi[:, :m_i]), axis=1))) if m_i else 0.0
        lam_b = float(np.max(np.sum(np.abs(psi[:, m_i:]), axis=1))) if system.m_boundary else 0.0
        return lam_i, lam_b

    lam_i, lam_b = maxima(cardinal_matrix(system, samples))
    sobolev = lam_i + lam_b
    for eta in range(system.points.shape[1]):
        sobolev += sum(maxima(cardinal_matrix(system, samples, DiffOperator.partial(eta))))
    return LebesgueConstants(lam_i, lam_b, sobolev)


def condition_number(system: StencilSystem) -> float:
    """2-norm condition number of M; +inf when M is exactly singular."""
    with np.errstate(all='ignore'):
        sv = svdvals(system.matrix, check_finite=False)
    if sv[-1] == 0 or not np.all(np.isfinite(sv)):
        return np.inf
    return float(sv[0] / sv[-1])


def nodal_data(system: StencilSystem, u: Callable, du: Callable) -> np.ndarray:
    """Values at interior nodes followed by normal derivatives at boundary nodes."""
    m_i = system.m_interior
    values = np.array([u(x) for x in system.points[:m_i]], dtype=float)
    fluxes = np.array([np.dot(du(x), n) for x, n in zip(system.points[m_i:], system.normals)], dtype=float)
    return np.concatenate([values, fluxes])


def interp_error(system: StencilSystem, u: Callable, du: Callable, x_eval) -> float:
    """|u(x) - u^h(x)| for the interpolant built from nodal data."""
    psi = cardinal_functions(system, x_eval)
    return float(abs(u(np.asarray(x_eval, dtype=float)) - psi @ nodal_data(system, u, du)))
