from types import SimpleNamespace

import numpy as np
import pytest

from exceptions import ProjectionError
from geometry import generate_nodes, reference_stencil, unit_disk
from interp import assemble, condition_number
from kernels import KernelSpec, PolyBasis
from models.nodes import Stencil
from optdir import optimal_directions, schur_data
from stabilize import (
    SelectionConfig, lebesgue_cost_and_gradient, optimize_boundary_positions, optimize_reference_stencil,
    project_boundary_nodes, project_reference_stencil, select_boundary_nodes,
)


def boundary_parts(nodes, stencil):
    return (nodes.positions[list(stencil.interior)], nodes.positions[list(stencil.boundary)],
            stencil.boundary_normals(nodes))


def test_selection_config_bounds():
    SelectionConfig(0.0)
    SelectionConfig(1.0)
    for bad in (-0.1, 1.5):
        with pytest.raises(ValueError):
            SelectionConfig(bad)
    with pytest.raises(ValueError):
        SelectionConfig(0.5, recompute=False)


def test_zero_threshold_removes_nothing(tilted_reference, mq):
    nodes, stencil = tilted_reference
    reduced, removed = select_boundary_nodes(stencil, nodes, mq, SelectionConfig(0.0))
    assert removed == 0
    assert reduced == stencil


def test_optimal_normals_are_kept(tilted_reference, mq):
    nodes, stencil = tilted_reference
    directions = optimal_directions(schur_data(stencil, nodes, mq)).directions
    optimal = nodes.with_positions(stencil.boundary, nodes.positions[list(stencil.boundary)], directions)
    _, removed = select_boundary_nodes(stencil, optimal, mq, SelectionConfig(0.99))
    assert removed == 0


def test_interior_only_stencil_passes_through(mq):
    nodes, _ = reference_stencil(0.2)
    stencil = Stencil(8, tuple(range(15)), ())
    assert select_boundary_nodes(stencil, nodes, mq, SelectionConfig(0.7)) == (stencil, 0)


def test_removed_count_is_even_on_reference_sweep(mq):
    for alpha in np.linspace(-np.pi / 2, np.pi / 2, 37):
        nodes, stencil = reference_stencil(alpha)
        reduced, removed = select_boundary_nodes(stencil, nodes, mq, SelectionConfig(0.6))
        assert removed % 2 == 0, f"alpha={alpha}"
        assert reduced.m_boundary == 7 - removed
        # survivors are a mirror-symmetric subset
        kept = nodes.positions[list(reduced.boundary), 0]
        assert np.allclose(np.sort(kept), np.sort(-kept))


def test_removed_count_grows_with_threshold(mq, rng):
    grid = np.linspace(0.0, 1.0, 11)
    for _ in range(10):
        nodes, stencil = reference_stencil(rng.uniform(-1.4, 1.4))
        theta = rng.uniform(-0.6, 0.6, stencil.m_boundary)
        normals = np.column_stack([np.sin(theta), -np.cos(theta)])
        nodes = nodes.with_positions(stencil.boundary, nodes.positions[list(stencil.boundary)], normals)
        counts = [select_boundary_nodes(stencil, nodes, mq, SelectionConfig(d)).removed for d in grid]
        assert counts[0] == 0
        assert all(b >= a for a, b in zip(counts, counts[1:]))


def test_projection_on_flat_reference():
    nodes, stencil, _ = project_reference_stencil(0.0, 1.0)
    feet = nodes.positions[list(stencil.boundary)]
    assert stencil.m_boundary == 6
    assert np.allclose(feet[:, 1], 0.0, atol=1e-12)
    assert np.allclose(np.sort(feet[:, 0]), np.arange(-2.5, 3.0, 1.0))
    assert np.allclose(nodes.normals[list(stencil.boundary)], (0.0, -1.0))
    assert stencil.m_interior == 15 and stencil.center == 8


def test_projection_on_tilted_reference_follows_the_boundary():
    alpha = 0.4
    nodes, stencil, boundary = project_reference_stencil(alpha, 1.0)
    feet = nodes.positions[list(stencil.boundary)]
    assert np.allclose(np.linalg.norm(feet - boundary.focus, axis=1), boundary.radius, atol=1e-9)
    assert np.allclose(nodes.normals[list(stencil.boundary)], boundary.normal_field(feet), atol=1e-9)


def test_projection_on_the_disk():
    disk = unit_disk()
    nodes = generate_nodes(disk, 0.1)
    projected = project_boundary_nodes(nodes, disk)
    feet = projected.positions[projected.boundary_indices]
    normals = projected.normals[projected.boundary_indices]
    assert np.allclose(np.linalg.norm(feet, axis=1), 1.0, atol=1e-9)
    assert np.allclose(normals, feet, atol=1e-9)
    assert projected.n_interior == nodes.n_interior
    gaps = np.linalg.norm(feet[:, None] - feet[None, :], axis=-1)
    gaps[np.diag_indices(len(feet))] = np.inf
    assert gaps.min() >= 0.5 * nodes.spacing

    again = project_boundary_nodes(projected, disk)
    assert np.array_equal(again.positions, projected.positions)
    assert np.array_equal(again.normals, projected.normals)


def test_projection_absorbs_interior_nodes_on_the_boundary():
    spacing = 0.1
    # at alpha = pi/3 the boundary circle passes through four interior nodes
    nodes, stencil, boundary = project_reference_stencil(np.pi / 3, spacing)
    stencil.validate(nodes)
    assert stencil.m_interior == 11
    _, _, distance = boundary.closest_points(nodes.positions[list(stencil.interior)])
    assert distance.min() >= 0.1 * spacing
    assert np.allclose(nodes.positions[stencil.center], (0.0, np.sqrt(3.0) * spacing))


def test_projection_without_first_layer():
    nodes, _ = reference_stencil(0.0)

    def far_away(points):
        points = np.asarray(points)
        return points, np.tile([0.0, -1.0], (len(points), 1)), np.full(len(points), 10.0)

    with pytest.raises(ProjectionError):
        project_boundary_nodes(nodes, SimpleNamespace(closest_points=far_away))


def test_lebesgue_gradient_matches_finite_differences():
    kernel = KernelSpec.from_name('mq', 1.0)
    nodes, stencil = reference_stencil(0.3)
    pi, pb, normals = boundary_parts(nodes, stencil)
    cost, grad = lebesgue_cost_and_gradient(pi, pb, normals, kernel)
    assert cost > 0
    h = 1e-5
    numeric = np.zeros_like(grad)
    for b in range(len(pb)):
        for eta in range(2):
            plus, minus = pb.copy(), pb.copy()
            plus[b, eta] += h
            minus[b, eta] -= h
            numeric[b, eta] = (lebesgue_cost_and_gradient(pi, plus, normals, kernel)[0]
                               - lebesgue_cost_and_gradient(pi, minus, normals, kernel)[0]) / (2 * h)
    assert np.allclose(grad, numeric, atol=1e-4 * np.abs(grad).max())


def test_optimize_reference_stencil(mq):
    nodes, stencil = reference_stencil(0.0)
    initial, _ = lebesgue_cost_and_gradient(*boundary_parts(nodes, stencil), mq)
    result = optimize_reference_stencil(0.0, mq, max_iter=40)
    assert result.history[0] == pytest.approx(initial)
    assert all(b <= a for a, b in zip(result.history, result.history[1:]))
    assert result.history[-1] <= initial

    result.stencil.validate(result.nodes)
    feet = result.nodes.positions[list(result.stencil.boundary)]
    assert np.allclose(feet[:, 1], 0.0, atol=1e-12)
    assert np.allclose(np.sort(feet[:, 0]), np.sort(-feet[:, 0]), atol=1e-3)


@pytest.mark.slow
@pytest.mark.parametrize('alpha', [-np.pi / 12, 0.0, np.pi / 12])
def test_optimize_reference_stencil_over_tilts(alpha, mq):
    result = optimize_reference_stencil(alpha, mq)
    history = result.history
    assert all(b <= a for a, b in zip(history, history[1:]))
    assert history[-1] < history[0]
    if alpha == 0.0:
        x = result.nodes.positions[list(result.stencil.boundary), 0]
        assert np.allclose(np.sort(x), np.sort(-x), atol=1e-3)


def test_optimize_without_boundary_moves_tangentially(mq):
    nodes, stencil = reference_stencil(0.0)
    result = optimize_boundary_positions(stencil, nodes, mq, max_iter=10)
    feet = result.nodes.positions[list(result.stencil.boundary)]
    assert np.allclose(feet[:, 1], 0.0, atol=1e-12)
    assert np.allclose(result.nodes.normals[list(result.stencil.boundary)], (0.0, -1.0))
    assert len(result.history) >= 1


def test_optimize_needs_boundary_nodes(mq):
    nodes, _ = reference_stencil(0.0)
    with pytest.raises(ValueError):
        optimize_boundary_positions(Stencil(8, tuple(range(15)), ()), nodes, mq)


@pytest.mark.slow
def test_selection_bounds_the_reference_sweep():
    spacing = 0.1
    kernel = KernelSpec.from_name('mq', 0.5, spacing)
    basis = PolyBasis(2)
    plain, stabilized = [], []
    for alpha in np.linspace(-np.pi / 2, np.pi / 2, 721):
        nodes, stencil = reference_stencil(alpha, spacing)
        plain.append(condition_number(assemble(stencil, nodes, kernel, basis)))
        reduced, _ = select_boundary_nodes(stencil, nodes, kernel, SelectionConfig(0.6))
        stabilized.append(condition_number(assemble(reduced, nodes, kernel, basis)))
    assert np.all(np.isfinite(stabilized))
    assert max(stabilized) * 1e3 <= max(plain)
