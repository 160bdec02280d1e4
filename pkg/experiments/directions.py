"""
Optimal directions of the reference stencil over the shape parameter,
with and without node perturbation and polynomial augmentation.
"""

import logging
from typing import List

import numpy as np

from config import OPTDIR_EPS_GRID, OPTDIR_PERTURBATION, REFERENCE_SPACING
from exceptions import NumericalError
from geometry import reference_stencil
from kernels import KernelSpec, PolyBasis
from optdir import optimal_directions, poly_delta_w_local, schur_data_local

from .base import Experiment

logger = logging.getLogger(__name__)

HEADER = ('eps_s', 'perturbed', 'node', 'x', 'y', 'nx_bare', 'ny_bare', 'nx_poly', 'ny_poly',
          'angle_gap_deg', 'residual', 'iterations', 'converged')

SMALL_EPS_S = 0.1


def reference_positions(spacing: float, perturb: float = 0.0, seed: int = 0):
    """Interior and boundary positions of the reference stencil, optionally jittered."""
    nodes, stencil = reference_stencil(0.0, spacing)
    interior = nodes.positions[list(stencil.interior)].copy()
    boundary = nodes.positions[list(stencil.boundary)].copy()
    if perturb > 0:
        rng = np.random.default_rng(seed)
        interior += perturb * spacing * rng.uniform(-1.0, 1.0, interior.shape)
        boundary += perturb * spacing * rng.uniform(-1.0, 1.0, boundary.shape)
    return interior, boundary, stencil.boundary_normals(nodes)


def direction_rows(eps_s: float, perturbed: bool, interior: np.ndarray, boundary: np.ndarray,
                   normals: np.ndarray, kernel: KernelSpec, basis: PolyBasis) -> List[tuple]:
    bare = optimal_directions(schur_data_local(interior, boundary, kernel))
    poly = bare.directions
    gaps = np.zeros(len(boundary))
    if basis.size:
        influence = poly_delta_w_local(interior, boundary, normals, kernel, basis)
        poly, gaps = influence.augmented.directions, influence.angle_shift_deg
    if not bare.converged:
        logger.warning("eps_s=%g perturbed=%s: optimal directions did not converge", eps_s, perturbed)
    return [
        (eps_s, perturbed, k, x[0], x[1], nb[0], nb[1], npoly[0], npoly[1], gap,
         bare.residual, bare.iterations, bare.converged)
        for k, (x, nb, npoly, gap) in enumerate(zip(boundary, bare.directions, poly, gaps))
    ]


class Directions(Experiment):
    name = 'optdir'

    def run(self) -> List[str]:
        cfg = self.config
        spacing = cfg.spacing or REFERENCE_SPACING
        grid = ((SMALL_EPS_S,) if cfg.allow_small_eps else ()) + tuple(OPTDIR_EPS_GRID)
        amplitude = cfg.perturb or OPTDIR_PERTURBATION
        cases = [(eps_s, perturbed) for eps_s in grid for perturbed in (False, True)]

        def run_case(case):
            eps_s, perturbed = case
            kernel = KernelSpec.from_name(cfg.kernel, eps_s, spacing)
            interior, boundary, normals = reference_positions(spacing, amplitude if perturbed else 0.0, cfg.seed)
            try:
                return direction_rows(eps_s, perturbed, interior, boundary, normals, kernel, self.basis)
            except NumericalError as exc:
                logger.warning("eps_s=%g perturbed=%s: %s", eps_s, perturbed, exc)
                return []

        rows = [row for chunk in self._map(run_case, cases, "optdir") for row in chunk]
        return [self.data.write_csv("optdir.csv", HEADER, rows)]
