from types import SimpleNamespace

import numpy as np
import pytest

from exceptions import ConditioningError, SingularAssemblyError
from geometry import ARRANGEMENTS, hex_arrangement
from interp import (
    DiffOperator, assemble, assemble_local, cardinal_functions, cardinal_matrix, condition_number,
    interp_error, lebesgue, solve_interpolant, stencil_weights,
)
from kernels import Family, KernelSpec, PolyBasis

MQ1 = KernelSpec(Family.MQ, 1.0)
NO_POLY = PolyBasis(-1)


def two_node_system():
    return assemble_local([[0.0, 0.0]], [[1.0, 0.0]], [[1.0, 0.0]], MQ1, NO_POLY)


def small_system(basis=PolyBasis(1), kernel=MQ1):
    """12 hexagonal interior nodes above three boundary nodes with downward normals."""
    interior = hex_arrangement(ARRANGEMENTS['hex12'], 1.0)
    boundary = np.array([[-1.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
    normals = np.tile([0.0, -1.0], (3, 1))
    return assemble_local(interior, boundary, normals, kernel, basis)


def affine(x):
    return 2.0 + 3.0 * x[0] - x[1]


def affine_gradient(x):
    return np.array([3.0, -1.0])


def test_single_interior_node_matrix():
    system = assemble_local([[0.3, 0.1]], np.zeros((0, 2)), np.zeros((0, 2)), MQ1, NO_POLY)
    assert np.array_equal(system.matrix, [[1.0]])


def test_two_node_matrix():
    expected = [[1.0, np.sqrt(2.0)], [1.0 / np.sqrt(2.0), 0.0]]
    assert np.allclose(two_node_system().matrix, expected, atol=1e-15)


def test_reference_stencil_matrix_size(reference, mq):
    nodes, stencil = reference
    system = assemble(stencil, nodes, mq, PolyBasis(2))
    assert system.matrix.shape == (28, 28)
    assert (system.m, system.m_interior, system.m_boundary, system.q) == (22, 15, 7, 6)


def test_coincident_nodes_rejected():
    with pytest.raises(SingularAssemblyError):
        assemble_local([[0.0, 0.0], [0.0, 0.0]], np.zeros((0, 2)), np.zeros((0, 2)), MQ1, NO_POLY)


def test_one_normal_per_boundary_node():
    with pytest.raises(ValueError):
        assemble_local([[0.0, 0.0]], [[1.0, 0.0]], np.zeros((0, 2)), MQ1, NO_POLY)


def test_normal_orthogonal_to_every_gradient_is_singular():
    system = assemble_local([[0.0, 0.0]], [[1.0, 0.0]], [[0.0, 1.0]], MQ1, NO_POLY)
    with pytest.raises(ConditioningError):
        stencil_weights(system, DiffOperator.identity(), (0.5, 0.0))


def test_identity_weights_at_interior_node():
    system = small_system()
    for j in (0, 5, 11):
        weights = stencil_weights(system, DiffOperator.identity(), system.points[j])
        expected = np.zeros(system.m)
        expected[j] = 1.0
        assert np.allclose(weights.weights, expected, atol=1e-8)
        assert weights.interior.shape == (12,) and weights.boundary.shape == (3,)


@pytest.mark.parametrize('axis', [0, 1])
def test_partial_weights_reproduce_affine_derivatives(axis):
    system = small_system()
    data = np.concatenate([
        [affine(x) for x in system.points[:12]],
        [affine_gradient(x) @ n for x, n in zip(system.points[12:], system.normals)],
    ])
    for x in ([0.2, 0.7], [-0.9, 1.4], [0.0, 0.3]):
        weights = stencil_weights(system, DiffOperator.partial(axis), x)
        assert weights.weights @ data == pytest.approx(affine_gradient(x)[axis], rel=1e-8)


def test_laplacian_weights_match_dense_inverse():
    system = two_node_system()
    r1 = 1.0
    rhs = np.array([2.0, (1 + r1 ** 2) ** -1.5 + 1.0 / np.sqrt(1 + r1 ** 2)])
    expected = np.linalg.inv(system.matrix).T @ rhs
    weights = stencil_weights(system, DiffOperator.laplacian(), (0.0, 0.0))
    assert np.allclose(weights.weights, expected, rtol=1e-12, atol=1e-12)


def test_normal_derivative_operator_requires_unit_direction():
    with pytest.raises(ValueError):
        DiffOperator.normal_derivative((1.0, 1.0))
    op = DiffOperator.normal_derivative((0.6, 0.8))
    system = small_system()
    x = np.array([0.1, 0.9])
    combined = 0.6 * stencil_weights(system, DiffOperator.partial(0), x).weights \
        + 0.8 * stencil_weights(system, DiffOperator.partial(1), x).weights
    assert np.allclose(stencil_weights(system, op, x).weights, combined, atol=1e-9)


def test_cardinal_functions_are_kronecker_deltas():
    system = small_system()
    psi = cardinal_matrix(system, system.points[:12])
    # interior cardinals at interior nodes, boundary cardinals vanish there
    assert np.allclose(psi[:, :12], np.eye(12), atol=1e-8)
    assert np.allclose(psi[:, 12:], 0.0, atol=1e-8)
    for k, (x, n) in enumerate(zip(system.points[12:], system.normals)):
        dpsi = cardinal_matrix(system, x, DiffOperator.normal_derivative(n))[0]
        expected = np.zeros(system.m)
        expected[12 + k] = 1.0
        assert np.allclose(dpsi, expected, atol=1e-7)
    assert np.allclose(cardinal_functions(system, system.points[3]), psi[3])


def test_lebesgue_single_node():
    system = assemble_local([[0.0, 0.0]], np.zeros((0, 2)), np.zeros((0, 2)), MQ1, NO_POLY)
    constants = lebesgue(system, 11)
    assert constants.interior == pytest.approx(1.0)
    assert constants.boundary == 0.0


def test_lebesgue_without_boundary_nodes():
    interior = hex_arrangement(ARRANGEMENTS['hex12'], 1.0)
    system = assemble_local(interior, np.zeros((0, 2)), np.zeros((0, 2)), MQ1, PolyBasis(1))
    constants = lebesgue(system, 21)
    assert constants.boundary == 0.0
    assert constants.interior >= 1.0 - 1e-8
    assert constants.sobolev > constants.interior


def test_lebesgue_with_boundary_nodes():
    constants = lebesgue(small_system(), 21)
    assert constants.interior >= 1.0 - 1e-8
    assert constants.boundary > 0.0


def test_condition_number_examples():
    assert condition_number(SimpleNamespace(matrix=np.eye(4))) == pytest.approx(1.0)
    assert condition_number(SimpleNamespace(matrix=np.diag([10.0, 1.0]))) == pytest.approx(10.0)
    assert condition_number(SimpleNamespace(matrix=np.zeros((2, 2)))) == np.inf
    system = two_node_system()
    sv = np.linalg.svd(system.matrix, compute_uv=False)
    assert condition_number(system) == pytest.approx(sv[0] / sv[-1], rel=1e-12)


def test_interp_error_examples():
    system = small_system(PolyBasis(2))
    assert interp_error(system, affine, affine_gradient, (0.3, 0.8)) <= 1e-8

    def quadratic(x):
        return 1.0 + x[0] * x[1] - 0.5 * x[1] ** 2

    def quadratic_gradient(x):
        return np.array([x[1], x[0] - x[1]])

    assert interp_error(system, quadratic, quadratic_gradient, (-0.4, 1.1)) <= 1e-7
    assert interp_error(system, lambda x: 0.0, lambda x: np.zeros(2), (0.3, 0.8)) == 0.0


def test_adjoint_solve_matches_explicit_inverse(rng):
    interior = hex_arrangement(ARRANGEMENTS['hex5'], 1.0)
    for _ in range(20):
        jitter = 0.1 * rng.uniform(-1, 1, interior.shape)
        boundary = np.array([[-0.5, -0.3], [0.5, -0.3]])
        theta = rng.uniform(-0.5, 0.5, 2)
        normals = np.column_stack([np.sin(theta), -np.cos(theta)])
        system = assemble_local(interior + jitter, boundary, normals, MQ1, PolyBasis(1))
        x = rng.uniform(-0.5, 0.5, 2) + (0.0, 0.6)
        rhs = system.rhs(DiffOperator.laplacian(), x)[:, 0]
        expected = np.linalg.solve(system.matrix.T, rhs)
        weights = stencil_weights(system, DiffOperator.laplacian(), x)
        assert np.allclose(np.concatenate([weights.weights, weights.tail]), expected,
                           rtol=1e-9, atol=1e-9 * np.abs(expected).max())


def test_interpolant_is_orthogonal_to_polynomials(rng):
    system = small_system(PolyBasis(2))
    alpha, _ = solve_interpolant(system, rng.normal(size=system.m))
    p = system.matrix[system.m:, :system.m]
    assert np.allclose(p @ alpha, 0.0, atol=1e-9 * np.abs(alpha).max())


def test_matrix_symmetric_without_boundary_or_polynomials(rng):
    points = rng.uniform(0, 3, (8, 2))
    system = assemble_local(points, np.zeros((0, 2)), np.zeros((0, 2)), KernelSpec(Family.GA, 0.7), NO_POLY)
    assert np.array_equal(system.matrix, system.matrix.T)


def test_normal_flip_negates_boundary_row():
    base = small_system(PolyBasis(2))
    normals = base.normals.copy()
    normals[1] *= -1
    flipped = assemble_local(base.points[:12], base.points[12:], normals, MQ1, PolyBasis(2))
    row = 12 + 1
    assert np.array_equal(flipped.matrix[row], -base.matrix[row])
    others = [r for r in range(base.matrix.shape[0]) if r != row]
    assert np.array_equal(flipped.matrix[others], base.matrix[others])
