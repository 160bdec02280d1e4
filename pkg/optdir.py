"""
Boundary-normal analysis through the Schur complement of phi_II in M.

With interior rows and columns first, det M = det(phi_II) det(S_BB) and
S_BB = H(G_BB, N), where G_BB = D_BB - D_BI psi_bar depends on node
positions only. The optimal directions are the unit normals maximizing
|det S_BB|.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from config import OPTDIR_MAX_ITER, OPTDIR_TOL, SINGULAR_RCOND, SINGULAR_ROTATION
from dmat import DMat, dmat_add, dmat_matmul, op_H
from exceptions import KernelDomainError, SingularAssemblyError, UnisolvencyError
from kernels import KernelSpec, PolyBasis, gradient_field, phi, phi_prime
from models.nodes import NodeSet, Stencil

logger = logging.getLogger(__name__)

# S_i above this condition number is treated as singular
SUBMATRIX_COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class SchurData:
    """Factorized phi_II and the d-matrices of one stencil."""

    points_interior: np.ndarray
    points_boundary: np.ndarray
    kernel: KernelSpec
    phi_lu: Tuple[np.ndarray, np.ndarray]
    phi_ib: np.ndarray
    psi_bar: np.ndarray
    d_bb: DMat
    d_bi: DMat
    g_bb: DMat

    @property
    def m_boundary(self) -> int:
        return self.points_boundary.shape[0]

    @property
    def m_interior(self) -> int:
        return self.points_interior.shape[0]

    @property
    def log_det_phi(self) -> Tuple[float, float]:
        """(sign, log|det phi_II|) from the LU factors."""
        lu, piv = self.phi_lu
        if lu.size == 0:
            return 1.0, 0.0
        diag = np.diag(lu)
        swaps = np.count_nonzero(piv != np.arange(len(piv)))
        sign = (-1.0) ** swaps * np.prod(np.sign(diag))
        return float(sign), float(np.sum(np.log(np.abs(diag))))

    def solve_phi(self, rhs: np.ndarray) -> np.ndarray:
        if self.m_interior == 0:
            return np.zeros((0,) + np.shape(rhs)[1:])
        return lu_solve(self.phi_lu, rhs)

    def restricted(self, keep: Sequence[int]) -> 'SchurData':
        """Same data with only the listed boundary nodes."""
        keep = list(keep)
        every = range(self.m_interior)
        return SchurData(
            self.points_interior,
            self.points_boundary[keep],
            self.kernel,
            self.phi_lu,
            self.phi_ib[:, keep],
            self.psi_bar[:, keep],
            self.d_bb.submatrix(keep, keep),
            self.d_bi.submatrix(keep, every),
            self.g_bb.submatrix(keep, keep),
        )


@dataclass(frozen=True, eq=False)
class OptResult:
    directions: np.ndarray
    iterations: int
    residual: float
    det_value: float
    converged: bool


@dataclass(frozen=True, eq=False)
class SingleNodeVector:
    """v up to the positive factor |det phi_II|, and its per-node coefficients."""

    vector: np.ndarray
    coefficients: np.ndarray
    singular: bool

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))

    @property
    def direction(self) -> np.ndarray:
        return self.vector / self.norm


@dataclass(frozen=True, eq=False)
class ThreeNodeReport:
    det_at_zero: float
    det_at_half_pi: float
    det_at_mixed: float
    extrema: List[np.ndarray] = field(default_factory=list)
    classes: List[str] = field(default_factory=list)

    @property
    def distinct(self) -> bool:
        return len(set(self.classes)) == len(self.classes) > 1


@dataclass(frozen=True, eq=False)
class PolyInfluence:
    delta_w: np.ndarray
    g_aug: DMat
    bare: OptResult
    augmented: OptResult
    angle_shift_deg: np.ndarray


def schur_data_local(points_interior: np.ndarray, points_boundary: np.ndarray,
                     kernel: KernelSpec) -> SchurData:
    if kernel.conditional_order > 1:
        raise KernelDomainError(
            f"{kernel.name} is conditionally positive definite of order {kernel.conditional_order}; "
            "the Schur analysis needs order <= 1"
        )
    pi = np.asarray(points_interior, dtype=float)
    pb = np.asarray(points_boundary, dtype=float)
    pi = pi.reshape(-1, pb.shape[-1])
    if len(pb) == 0:
        raise ValueError("Schur analysis needs at least one boundary node")

    phi_ii = phi(kernel, np.linalg.norm(pi[:, None, :] - pi[None, :, :], axis=-1))
    phi_ib = phi(kernel, np.linalg.norm(pi[:, None, :] - pb[None, :, :], axis=-1))
    if len(pi):
        lu, piv = lu_factor(phi_ii)
        diag = np.abs(np.diag(lu))
        if diag.min() <= SINGULAR_RCOND * diag.max():
            raise SingularAssemblyError("phi_II is singular")
        psi_bar = lu_solve((lu, piv), phi_ib)
    else:
        lu, piv = np.zeros((0, 0)), np.zeros(0, dtype=np.int32)
        psi_bar = np.zeros((0, len(pb)))

    d_bb = DMat(gradient_field(kernel, pb[:, None, :] - pb[None, :, :]))
    d_bi = DMat(gradient_field(kernel, pb[:, None, :] - pi[None, :, :]).reshape(len(pb), len(pi), pb.shape[1]))
    g_bb = dmat_add(d_bb, dmat_matmul(d_bi, -psi_bar)) if len(pi) else d_bb
    return SchurData(pi, pb, kernel, (lu, piv), phi_ib, psi_bar, d_bb, d_bi, g_bb)


def schur_data(stencil: Stencil, nodes: NodeSet, kernel: KernelSpec) -> SchurData:
    stencil.validate(nodes)
    return schur_data_local(nodes.positions[list(stencil.interior)],
                            nodes.positions[list(stencil.boundary)], kernel)


def _as_vectors(normals: Union[DMat, np.ndarray]) -> np.ndarray:
    if isinstance(normals, DMat):
        return normals.vectors
    return np.atleast_2d(np.asarray(normals, dtype=float))


def s_bb(data: Union[SchurData, DMat], normals: Union[DMat, np.ndarray]) -> np.ndarray:
    """S_BB = H(G_BB, N)."""
    g = data.g_bb if isinstance(data, SchurData) else data
    return op_H(g, DMat.column(_as_vectors(normals)))


def single_node_v(data: SchurData) -> SingleNodeVector:
    """Optimal vector of a single boundary node, oriented so that det M(v) > 0."""
    if data.m_boundary != 1:
        raise ValueError(f"single_node_v needs exactly one boundary node, got {data.m_boundary}")
    sign, _ = data.log_det_phi
    g11 = data.g_bb[0, 0]
    radii = np.linalg.norm(data.points_boundary[0] - data.points_interior, axis=1)
    terms = data.psi_bar[:, 0] * phi_prime(data.kernel, radii)
    coefficients = -sign * terms
    scale = float(np.sum(np.abs(terms)))
    vector = sign * g11
    singular = bool(np.linalg.norm(vector) <= 1e-14 * scale) or scale == 0.0
    if singular:
        logger.debug("boundary node at %s sits on a singular location", data.points_boundary[0])
    return SingleNodeVector(vector, coefficients, singular)


def single_node_field(points_interior: np.ndarray, candidates: np.ndarray, kernel: KernelSpec) -> np.ndarray:
    """v for a lone boundary node placed at each candidate position, shape (n, d)."""
    sample = schur_data_local(points_interior, np.atleast_2d(candidates)[:1], kernel)
    sign, _ = sample.log_det_phi
    pi = sample.points_interior
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    psi_bar = sample.solve_phi(phi(kernel, np.linalg.norm(pi[:, None, :] - candidates[None, :, :], axis=-1)))
    grads = gradient_field(kernel, candidates[:, None, :] - pi[None, :, :])
    return -sign * np.einsum('njd,jn->nd', grads, psi_bar)


def _rotate(vectors: np.ndarray, angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    rotated = np.array(vectors)
    rotated[:, 0] = c * vectors[:, 0] - s * vectors[:, 1]
    rotated[:, 1] = s * vectors[:, 0] + c * vectors[:, 1]
    return rotated


def _t_vector(g: np.ndarray, normals: np.ndarray, i: int) -> np.ndarray:
    """
    Gradient of det S_BB with respect to n_i, divided by det(S_i).

    S_i (S_BB without row and column i) does not depend on n_i, so when it
    is singular the other normals are rotated by SINGULAR_ROTATION instead,
    up to 8 times, before falling back to least squares. The rotation acts
    in the x-y plane.
    """
    m = g.shape[0]
    if m == 1:
        return g[0, 0].copy()
    others = [j for j in range(m) if j != i]
    for _ in range(8):
        s = np.einsum('ijd,id->ij', g, normals)
        s_i = s[np.ix_(others, others)]
        if np.linalg.cond(s_i) < SUBMATRIX_COND_LIMIT:
            w = np.linalg.solve(s_i, s[others, i])
            return g[i, i] - np.einsum('j,jd->d', w, g[i, others])
        logger.warning("S_%d singular, rotating the other normals by %g rad", i, SINGULAR_ROTATION)
        normals = np.array(normals)
        normals[others] = _rotate(normals[others], SINGULAR_ROTATION)
    w = np.linalg.lstsq(s_i, s[others, i], rcond=None)[0]
    return g[i, i] - np.einsum('j,jd->d', w, g[i, others])


def _residual(t: np.ndarray, normals: np.ndarray) -> float:
    """max_i (1 - |t_i . n_i| / |t_i|), evaluated through the sine for accuracy."""
    lengths = np.linalg.norm(t, axis=1)
    live = lengths > 0
    if not live.any():
        return 0.0
    unit = t[live] / lengths[live, None]
    cos = np.abs(np.sum(unit * normals[live], axis=1))
    sin2 = np.sum((unit - np.sum(unit * normals[live], axis=1)[:, None] * normals[live]) ** 2, axis=1)
    return float(np.max(sin2 / (1.0 + cos)))


def _oriented(t: np.ndarray, previous: np.ndarray) -> np.ndarray:
    length = np.linalg.norm(t)
    if length == 0:
        return previous
    n = t / length
    return -n if np.dot(n, previous) < 0 else n


def _initial_directions(g: np.ndarray, init, data: Optional[SchurData]) -> np.ndarray:
    m, _, d = g.shape
    if isinstance(init, np.ndarray) or isinstance(init, (list, tuple)):
        start = np.array(init, dtype=float).reshape(m, d)
        return start / np.linalg.norm(start, axis=1)[:, None]
    geometric = None
    if data is not None and data.m_interior:
        geometric = data.points_boundary - data.points_interior.mean(axis=0)
    if init == 'geometric':
        if geometric is None:
            raise ValueError("geometric initialization needs interior node positions")
        start = geometric
    elif init == 'diag':
        start = np.array([g[i, i] for i in range(m)])
        flat = np.linalg.norm(start, axis=1) == 0
        if flat.any():
            start[flat] = geometric[flat] if geometric is not None else np.eye(d)[0]
    else:
        raise ValueError(f"unknown initialization '{init}'")
    return start / np.linalg.norm(start, axis=1)[:, None]


def optimal_directions(data: Union[SchurData, DMat], init='diag', tol: float = OPTDIR_TOL,
                       max_iter: int = OPTDIR_MAX_ITER) -> OptResult:
    """
    Fixed-point iteration n_i <- t_i / |t_i| for the normals maximizing |det S_BB|.

    The first half of the budget updates every normal from the previous
    iterate; the rest updates them one at a time, each step maximizing
    |det S_BB| in that normal exactly. init is 'diag', 'geometric' or an
    array of starting normals.
    """
    schur = data if isinstance(data, SchurData) else None
    g = (data.g_bb if schur is not None else data).entries
    m = g.shape[0]
    if m == 0:
        raise ValueError("no boundary nodes")
    if np.any(np.all(np.linalg.norm(g, axis=2) == 0, axis=1)):
        raise ValueError("G_BB has an all-zero row")

    normals = _initial_directions(g, init, schur)
    simultaneous = max(1, max_iter // 2)
    iterations = 0
    while True:
        t = np.array([_t_vector(g, normals, i) for i in range(m)])
        residual = _residual(t, normals)
        if residual < tol or iterations >= max_iter:
            break
        if iterations < simultaneous:
            normals = np.array([_oriented(t[i], normals[i]) for i in range(m)])
        else:
            for i in range(m):
                normals[i] = _oriented(_t_vector(g, normals, i), normals[i])
        iterations += 1

    converged = residual < tol
    if not converged:
        logger.warning("optimal directions not converged after %d iterations (residual %.3e)",
                       iterations, residual)
    det_value = float(np.linalg.det(np.einsum('ijd,id->ij', g, normals)))
    return OptResult(normals, iterations, residual, det_value, converged)


def two_node_tensor(g_bb: DMat) -> np.ndarray:
    """G with det S_BB = n_1 . G n_2 for two boundary nodes."""
    if g_bb.shape != (2, 2):
        raise ValueError("two_node_tensor needs a 2 x 2 d-matrix")
    g = g_bb.entries
    return np.outer(g[0, 0], g[1, 1]) - np.outer(g[0, 1], g[1, 0])


def two_node_closed_form(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float]:
    """Top singular pair of G: n_2 from G^T G, n_1 = G n_2 / |G n_2|, value sqrt(lambda_max)."""
    g = np.asarray(g, dtype=float)
    eigenvalues, eigenvectors = np.linalg.eigh(g.T @ g)
    lam = eigenvalues[-1]
    if lam <= 0:
        raise ValueError("G has no positive singular value")
    n2 = eigenvectors[:, -1]
    image = g @ n2
    return image / np.linalg.norm(image), n2, float(np.sqrt(lam))


def symmetric_three_node_dmat() -> DMat:
    """The three-node G_BB whose det S_BB is -(c1 c2 c3 + s1 s2 s3)."""
    ex, ey, zero = (1.0, 0.0), (0.0, 1.0), (0.0, 0.0)
    return DMat(np.array([
        [ex, ey, zero],
        [ey, zero, ex],
        [zero, ex, ey],
    ]))


def _angles_to_normals(angles: Sequence[float]) -> np.ndarray:
    angles = np.asarray(angles, dtype=float)
    return np.column_stack([np.cos(angles), np.sin(angles)])


def symmetric_three_node_case() -> ThreeNodeReport:
    """Evaluate the two extremum families and converge to each from a nearby start."""
    g = symmetric_three_node_dmat()

    def det_at(angles):
        return float(np.linalg.det(s_bb(g, _angles_to_normals(angles))))

    half = np.pi / 2
    starts = [(0.15, -0.1, 0.12), (half - 0.12, half + 0.1, half - 0.15)]
    extrema, classes = [], []
    for start in starts:
        result = optimal_directions(g, init=_angles_to_normals(start))
        extrema.append(result.directions)
        axis_aligned = np.abs(result.directions[:, 0]) > np.abs(result.directions[:, 1])
        classes.append('zero' if axis_aligned.all() else 'half_pi' if not axis_aligned.any() else 'mixed')
    return ThreeNodeReport(det_at((0, 0, 0)), det_at((half, half, half)), det_at((0, 0, half)),
                           extrema, classes)


def poly_delta_w_local(points_interior: np.ndarray, points_boundary: np.ndarray, normals: np.ndarray,
                       kernel: KernelSpec, basis: PolyBasis) -> PolyInfluence:
    data = schur_data_local(points_interior, points_boundary, kernel)
    pi, pb = data.points_interior, data.points_boundary
    everything = np.vstack([pi, pb])
    origin = everything.mean(axis=0)
    scale = float(np.max(np.linalg.norm(everything - origin, axis=1))) or 1.0

    p_i = basis.values((pi - origin) / scale)
    if np.linalg.matrix_rank(p_i) < basis.size:
        raise UnisolvencyError(f"interior nodes do not determine polynomials of degree {basis.degree}")
    p_b = basis.values((pb - origin) / scale)
    dp_b = DMat(basis.gradients((pb - origin) / scale) / scale)

    a = data.solve_phi(p_i)
    s = np.linalg.inv(p_i.T @ a)
    e = data.phi_ib.T @ a - p_b
    cal_e = dmat_add(dmat_matmul(data.d_bi, a), DMat(-dp_b.entries))
    correction = dmat_matmul(cal_e, s @ e.T)
    g_aug = dmat_add(data.g_bb, correction)

    delta_w = op_H(correction, DMat.column(normals))
    bare = optimal_directions(data)
    augmented = optimal_directions(g_aug, init=bare.directions)
    cos = np.abs(np.sum(bare.directions * augmented.directions, axis=1))
    shift = np.degrees(np.arccos(np.clip(cos, 0.0, 1.0)))
    return PolyInfluence(delta_w, g_aug, bare, augmented, shift)


def poly_delta_w(stencil: Stencil, nodes: NodeSet, kernel: KernelSpec, basis: PolyBasis) -> PolyInfluence:
    """Polynomial-augmentation term Delta W and its effect on the optimal directions."""
    stencil.validate(nodes)
    return poly_delta_w_local(nodes.positions[list(stencil.interior)],
                              nodes.positions[list(stencil.boundary)],
                              stencil.boundary_normals(nodes), kernel, basis)
