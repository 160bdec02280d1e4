"""
Map of the single-node optimal vector v over candidate boundary positions.
"""

import logging
from typing import List, Tuple

import numpy as np

from config import ENVELOPE_SAMPLES, REFERENCE_SPACING, VMAP_GRID
from geometry import ARRANGEMENTS, hex_arrangement
from kernels import KernelSpec, phi_prime
from optdir import schur_data_local, single_node_field

from .base import Experiment

logger = logging.getLogger(__name__)

HEADER = ('x', 'y', 'vnorm', 'vx', 'vy')
COEFFICIENT_HEADER = ('x', 'y', 'node', 'w')


def arrangement_points(name: str, spacing: float, perturb: float = 0.0, seed: int = 0) -> np.ndarray:
    """Interior arrangement, optionally jittered by up to perturb * s per coordinate."""
    points = hex_arrangement(ARRANGEMENTS[name], spacing)
    if perturb > 0:
        rng = np.random.default_rng(seed)
        points = points + perturb * spacing * rng.uniform(-1.0, 1.0, points.shape)
    return points


def candidate_grid(points: np.ndarray, spacing: float, resolution: int = VMAP_GRID) -> np.ndarray:
    """Grid covering the arrangement with a margin of 4 s, minus the nodes themselves."""
    lo = points.min(axis=0) - 4.0 * spacing
    hi = points.max(axis=0) + 4.0 * spacing
    xs = np.linspace(lo[0], hi[0], resolution)
    ys = np.linspace(lo[1], hi[1], resolution)
    grid = np.stack(np.meshgrid(xs, ys, indexing='xy'), axis=-1).reshape(-1, 2)
    gaps = np.min(np.linalg.norm(grid[:, None, :] - points[None, :, :], axis=-1), axis=1)
    return grid[gaps > 1e-6 * spacing]


def lower_envelope(points: np.ndarray, spacing: float, samples: int = ENVELOPE_SAMPLES) -> np.ndarray:
    """Points at distance s below the arrangement: the lower boundary of the union of discs of radius s."""
    xs = np.linspace(points[:, 0].min() - spacing, points[:, 0].max() + spacing, samples)
    curve = []
    for x in xs:
        reach = np.abs(x - points[:, 0]) <= spacing
        if not reach.any():
            continue
        dx = x - points[reach, 0]
        curve.append((x, float(np.min(points[reach, 1] - np.sqrt(spacing ** 2 - dx ** 2)))))
    return np.array(curve)


def field_rows(points: np.ndarray, candidates: np.ndarray, kernel: KernelSpec) -> List[Tuple]:
    v = single_node_field(points, candidates, kernel)
    norms = np.linalg.norm(v, axis=1)
    return [(x, y, n, vx, vy) for (x, y), n, (vx, vy) in zip(candidates, norms, v)]


def coefficient_rows(points: np.ndarray, candidates: np.ndarray, kernel: KernelSpec) -> List[Tuple]:
    """Per-node coefficients w_j of v = sum_j w_j e_j at each candidate."""
    rows = []
    for x in candidates:
        data = schur_data_local(points, x[None, :], kernel)
        sign, _ = data.log_det_phi
        radii = np.linalg.norm(x - points, axis=1)
        w = -sign * data.psi_bar[:, 0] * phi_prime(kernel, radii)
        rows.extend((x[0], x[1], j, wj) for j, wj in enumerate(w))
    return rows


class VMap(Experiment):
    name = 'vmap'

    def run(self) -> List[str]:
        cfg = self.config
        spacing = cfg.spacing or REFERENCE_SPACING
        kernel = cfg.kernel_spec(spacing)
        points = arrangement_points(cfg.arrangement, spacing, cfg.perturb, cfg.seed)

        candidates = candidate_grid(points, spacing)
        chunks = np.array_split(candidates, max(1, cfg.workers))
        rows = [row for chunk in self._map(lambda c: field_rows(points, c, kernel), chunks, "vmap grid")
                for row in chunk]
        envelope = lower_envelope(points, spacing)
        self._report_progress("vmap envelope", 0, len(envelope))

        smallest = min(rows, key=lambda row: row[2])
        logger.info("%s: smallest |v| = %.3e at (%.4f, %.4f)", cfg.arrangement, smallest[2], smallest[0], smallest[1])
        return [
            self.data.write_csv("vmap.csv", HEADER, rows),
            self.data.write_csv("vmap_envelope.csv", HEADER, field_rows(points, envelope, kernel)),
            self.data.write_csv("vmap_coefficients.csv", COEFFICIENT_HEADER,
                                coefficient_rows(points, envelope, kernel)),
        ]
