"""
Node sets, boundaries and stencils.

Two boundary types answer nearest-point queries for projection and
position optimization: `Domain2D`, a polar curve r(theta) = R0 + A cos(k theta)
about a center, and `ReferenceBoundary`, the curve implied by the normals of
the reference stencil (a circle through the central boundary node centered
on the point G where the normal lines meet, or the line y = 0).
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from config import (
    BOUNDARY_RADIUS_FACTOR, LATTICE_CLEARANCE, SMOOTHING_RADIUS, SMOOTHING_SWEEPS,
)
from models.nodes import NodeSet, Stencil

logger = logging.getLogger(__name__)

SQRT3 = np.sqrt(3.0)

# Row counts of the interior arrangements, rows stacked upward from y = 0
ARRANGEMENTS = {
    'hex3': (2, 1),
    'hex5': (3, 2),
    'hex12': (5, 4, 3),
    'hex15': (6, 5, 4),
}

REFERENCE_CENTER = 8


def hex_arrangement(rows: Sequence[int], spacing: float) -> np.ndarray:
    """Hexagonal rows centered on x = 0 at heights (r + 1) * sqrt(3)/2 * s."""
    points = []
    for r, count in enumerate(rows):
        y = (r + 1) * SQRT3 / 2.0 * spacing
        for x in (np.arange(count) - (count - 1) / 2.0) * spacing:
            points.append((x, y))
    return np.array(points, dtype=float)


def reference_normals(alpha: float, xs: np.ndarray, spacing: float) -> np.ndarray:
    """Unit normals of boundary nodes (x, 0) along the lines through G."""
    xs = np.asarray(xs, dtype=float)
    normals = np.column_stack([xs * np.sin(alpha), np.full(xs.shape, -3.0 * spacing * np.cos(alpha))])
    lengths = np.linalg.norm(normals, axis=1)
    degenerate = lengths < 1e-300
    normals[degenerate] = (0.0, -1.0)
    lengths[degenerate] = 1.0
    return normals / lengths[:, None]


def reference_stencil(alpha: float, spacing: float = 1.0) -> Tuple[NodeSet, Stencil]:
    """
    The 22-node reference stencil: 15 interior nodes in rows of 6, 5, 4
    above 7 boundary nodes at y = 0, x = -3s..3s.

    alpha is the angle between the rightmost normal and the downward
    vertical, positive when the normals diverge (G above the boundary).
    Nodes are ordered interior first; the stencil is centered on the
    middle node of the second row.
    """
    if abs(alpha) > np.pi / 2 + 1e-12:
        raise ValueError(f"alpha must lie in [-pi/2, pi/2], got {alpha}")
    interior = hex_arrangement(ARRANGEMENTS['hex15'], spacing)
    xs = np.arange(-3, 4) * spacing
    boundary = np.column_stack([xs, np.zeros_like(xs)])
    nodes = NodeSet.from_parts(interior, boundary, reference_normals(alpha, xs, spacing), spacing)
    stencil = Stencil(REFERENCE_CENTER, tuple(range(15)), tuple(range(15, 22)))
    return nodes, stencil


@dataclass(frozen=True)
class ReferenceBoundary:
    """Boundary curve implied by the reference-stencil normals."""

    alpha: float
    spacing: float

    @property
    def is_flat(self) -> bool:
        return abs(np.sin(self.alpha)) < 1e-12

    @property
    def focus(self) -> np.ndarray:
        return np.array([0.0, 3.0 * self.spacing * np.cos(self.alpha) / np.sin(self.alpha)])

    @property
    def radius(self) -> float:
        return abs(float(self.focus[1]))

    def normal_field(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.is_flat:
            return np.tile([0.0, -1.0], (len(points), 1))
        rel = points - self.focus
        return np.sign(self.alpha) * rel / np.linalg.norm(rel, axis=1)[:, None]

    def closest_points(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Feet, outward normals at the feet, and distances."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.is_flat:
            feet = np.column_stack([points[:, 0], np.zeros(len(points))])
            return feet, self.normal_field(feet), np.abs(points[:, 1])
        rel = points - self.focus
        rho = np.linalg.norm(rel, axis=1)
        unit = rel / rho[:, None]
        feet = self.focus + self.radius * unit
        return feet, np.sign(self.alpha) * unit, np.abs(rho - self.radius)


@dataclass(frozen=True)
class Domain2D:
    """Star-shaped domain bounded by r(theta) = R0 + A cos(k theta) about `center`."""

    center: Tuple[float, float] = (0.0, 0.0)
    base_radius: float = 1.0
    amplitude: float = 0.0
    lobes: int = 0

    def __post_init__(self):
        if self.base_radius - abs(self.amplitude) <= 0:
            raise ValueError("r(theta) must stay positive")

    def radius(self, theta):
        return self.base_radius + self.amplitude * np.cos(self.lobes * theta)

    def radius_prime(self, theta):
        return -self.amplitude * self.lobes * np.sin(self.lobes * theta)

    def radius_second(self, theta):
        return -self.amplitude * self.lobes ** 2 * np.cos(self.lobes * theta)

    def point(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        r = self.radius(theta)
        return np.stack([self.center[0] + r * np.cos(theta), self.center[1] + r * np.sin(theta)], axis=-1)

    def tangent(self, theta) -> np.ndarray:
        """dP/dtheta (not normalized)."""
        theta = np.asarray(theta, dtype=float)
        r, dr = self.radius(theta), self.radius_prime(theta)
        return np.stack([dr * np.cos(theta) - r * np.sin(theta), dr * np.sin(theta) + r * np.cos(theta)], axis=-1)

    def _second(self, theta) -> np.ndarray:
        r, dr, ddr = self.radius(theta), self.radius_prime(theta), self.radius_second(theta)
        c, s = np.cos(theta), np.sin(theta)
        return np.stack([ddr * c - 2 * dr * s - r * c, ddr * s + 2 * dr * c - r * s], axis=-1)

    def normal(self, theta) -> np.ndarray:
        t = self.tangent(theta)
        n = np.stack([t[..., 1], -t[..., 0]], axis=-1)
        return n / np.linalg.norm(n, axis=-1, keepdims=True)

    def curvature(self, theta):
        """Signed curvature, negative on concave arcs."""
        r, dr, ddr = self.radius(theta), self.radius_prime(theta), self.radius_second(theta)
        return (r ** 2 + 2 * dr ** 2 - r * ddr) / (r ** 2 + dr ** 2) ** 1.5

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        rel = points - np.asarray(self.center)
        theta = np.arctan2(rel[:, 1], rel[:, 0])
        return np.linalg.norm(rel, axis=1) < self.radius(theta)

    def _fine_grid(self, samples: int = 20000) -> Tuple[np.ndarray, np.ndarray]:
        theta = np.linspace(0.0, 2 * np.pi, samples + 1)
        seg = np.linalg.norm(np.diff(self.point(theta), axis=0), axis=1)
        return theta, np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def perimeter(self) -> float:
        return float(self._fine_grid()[1][-1])

    def sample_boundary(self, spacing: float) -> Tuple[np.ndarray, np.ndarray]:
        """Points at (nearly) equal arc length s apart, with outward normals."""
        theta, arc = self._fine_grid()
        count = int(round(arc[-1] / spacing))
        if count < 3:
            raise ValueError(f"spacing {spacing} too large for the domain")
        targets = np.arange(count) * arc[-1] / count
        samples = np.interp(targets, arc, theta)
        return self.point(samples), self.normal(samples)

    def closest_points(self, points: np.ndarray, newton_steps: int = 12) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Feet, outward normals at the feet, and distances."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        samples = 8192
        grid = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
        _, nearest = cKDTree(self.point(grid)).query(points)
        theta = grid[nearest]
        max_step = 2 * np.pi / samples
        for _ in range(newton_steps):
            gap = self.point(theta) - points
            tangent = self.tangent(theta)
            f = np.sum(gap * tangent, axis=1)
            df = np.sum(tangent * tangent, axis=1) + np.sum(gap * self._second(theta), axis=1)
            step = np.where(df > 0, f / np.where(df > 0, df, 1.0), 0.0)
            theta = theta - np.clip(step, -max_step, max_step)
        feet = self.point(theta)
        return feet, self.normal(theta), np.linalg.norm(points - feet, axis=1)


def test_domain() -> Domain2D:
    """Five-lobed domain r = 1 + 0.25 cos(5 theta) centered at (2, 0)."""
    return Domain2D(center=(2.0, 0.0), base_radius=1.0, amplitude=0.25, lobes=5)


def unit_disk() -> Domain2D:
    return Domain2D()


def _lattice(domain: Domain2D, spacing: float) -> np.ndarray:
    extent = domain.base_radius + abs(domain.amplitude)
    h = SQRT3 / 2.0 * spacing
    rows = int(np.ceil(extent / h))
    cols = int(np.ceil(extent / spacing)) + 1
    points = []
    for j in range(-rows, rows + 1):
        offset = 0.5 * spacing if j % 2 else 0.0
        xs = np.arange(-cols, cols + 1) * spacing + offset
        points.append(np.column_stack([xs, np.full(xs.shape, j * h)]))
    return np.vstack(points) + np.asarray(domain.center)


def _admissible(domain: Domain2D, points: np.ndarray, clearance: float) -> np.ndarray:
    ok = domain.contains(points)
    if ok.any():
        _, _, dist = domain.closest_points(points[ok])
        ok[np.flatnonzero(ok)] = dist >= clearance
    return ok


def _smooth(domain: Domain2D, interior: np.ndarray, boundary: np.ndarray, spacing: float,
            sweeps: int, relaxation: float = 0.5) -> np.ndarray:
    """Laplacian smoothing of interior nodes; moves that break separation are undone."""
    n = len(interior)
    floor = 0.5 * spacing
    for _ in range(sweeps):
        everything = np.vstack([interior, boundary])
        pairs = cKDTree(everything).query_pairs(SMOOTHING_RADIUS * spacing, output_type='ndarray')
        sums = np.zeros_like(everything)
        counts = np.zeros(len(everything))
        np.add.at(sums, pairs[:, 0], everything[pairs[:, 1]])
        np.add.at(sums, pairs[:, 1], everything[pairs[:, 0]])
        np.add.at(counts, pairs[:, 0], 1)
        np.add.at(counts, pairs[:, 1], 1)

        moved = counts[:n] > 0
        proposal = interior.copy()
        centroids = sums[:n][moved] / counts[:n][moved, None]
        proposal[moved] += relaxation * (centroids - interior[moved])

        for _ in range(n):
            bad = ~_admissible(domain, proposal, floor)
            dist, _ = cKDTree(np.vstack([proposal, boundary])).query(proposal, k=2)
            bad |= dist[:, 1] < floor
            bad &= moved
            if not bad.any():
                break
            proposal[bad] = interior[bad]
            moved &= ~bad
        interior = proposal
    return interior


def generate_nodes(domain: Domain2D, spacing: float, sweeps: int = SMOOTHING_SWEEPS) -> NodeSet:
    """
    Boundary nodes by arc-length sampling, interior nodes from a clipped
    hexagonal lattice followed by smoothing sweeps. Deterministic.
    """
    boundary, normals = domain.sample_boundary(spacing)
    lattice = _lattice(domain, spacing)
    interior = lattice[_admissible(domain, lattice, LATTICE_CLEARANCE * spacing)]
    if len(interior) == 0:
        raise ValueError(f"domain too small for spacing {spacing}")
    if len(interior) < 100:
        logger.warning("only %d interior nodes at spacing %g", len(interior), spacing)
    interior = _smooth(domain, interior, boundary, spacing, sweeps)
    logger.info("generated %d interior and %d boundary nodes (s=%g)", len(interior), len(boundary), spacing)
    return NodeSet.from_parts(interior, boundary, normals, spacing)


def build_stencils(nodes: NodeSet, m_interior: int) -> List[Stencil]:
    """
    One stencil per interior node: its m_interior nearest interior nodes,
    plus the boundary nodes within 1.1 times the farthest of those.
    """
    interior = nodes.interior_indices
    boundary = nodes.boundary_indices
    if m_interior < 1 or m_interior > len(interior):
        raise ValueError(f"cannot build stencils of {m_interior} from {len(interior)} interior nodes")
    points = nodes.positions
    dist, nearest = cKDTree(points[interior]).query(points[interior], k=m_interior)
    dist = np.asarray(dist).reshape(len(interior), m_interior)
    nearest = np.asarray(nearest).reshape(len(interior), m_interior)
    boundary_tree = cKDTree(points[boundary]) if len(boundary) else None

    stencils = []
    for row, center in enumerate(interior):
        members: Tuple[int, ...] = ()
        if boundary_tree is not None:
            radius = BOUNDARY_RADIUS_FACTOR * dist[row, -1]
            hits = boundary_tree.query_ball_point(points[center], radius)
            if hits:
                hits = np.asarray(hits)
                gaps = np.linalg.norm(points[boundary[hits]] - points[center], axis=1)
                order = np.lexsort((hits, gaps))
                members = tuple(boundary[hits[order]])
        stencils.append(Stencil(int(center), tuple(interior[nearest[row]]), members))
    return stencils
