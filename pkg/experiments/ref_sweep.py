"""
Sweep of the reference stencil over the normal angle alpha.
"""

import logging
from typing import List, Tuple

import numpy as np
from scipy.optimize import bisect

from config import REFERENCE_SPACING
from exceptions import NumericalError
from geometry import reference_stencil
from interp import assemble, condition_number, interp_error, lebesgue
from kernels import KernelSpec, PolyBasis
from stabilize import SelectionConfig, project_reference_stencil, select_boundary_nodes

from .base import Experiment

logger = logging.getLogger(__name__)

HEADER = ('alpha', 'kappa', 'lambda_I', 'lambda_B', 'interp_err', 'N_rem')

# Projection is only meaningful while the projected feet stay spread out
PROJECTION_LIMIT = np.pi / 3

# Bisection tolerance on alpha for singular configurations
SINGULAR_XTOL = 1e-14

MODES_FOR = {
    'none': ('none',),
    'select': ('none', 'approach1'),
    'project': ('none', 'approach2'),
    'both': ('none', 'approach1', 'approach2'),
}


def exp_field(x: np.ndarray) -> float:
    return float(np.exp(x[0] + 2.0 * x[1]))


def exp_gradient(x: np.ndarray) -> np.ndarray:
    value = np.exp(x[0] + 2.0 * x[1])
    return np.array([value, 2.0 * value])


def sweep_alphas(samples: int, mode: str) -> np.ndarray:
    alphas = np.linspace(-np.pi / 2, np.pi / 2, samples)
    if mode == 'approach2':
        alphas = alphas[np.abs(alphas) <= PROJECTION_LIMIT + 1e-12]
    return alphas


def sweep_row(alpha: float, mode: str, kernel: KernelSpec, basis: PolyBasis, spacing: float,
              d_min: float) -> Tuple[float, float, float, float, float, int]:
    """One CSV row; numerical failures become inf sentinels."""
    removed = 0
    try:
        if mode == 'approach2':
            nodes, stencil, _ = project_reference_stencil(alpha, spacing)
        else:
            nodes, stencil = reference_stencil(alpha, spacing)
            if mode == 'approach1':
                stencil, removed = select_boundary_nodes(stencil, nodes, kernel, SelectionConfig(d_min))
        system = assemble(stencil, nodes, kernel, basis)
    except NumericalError as exc:
        logger.debug("alpha=%.6f (%s): %s", alpha, mode, exc)
        return alpha, np.inf, np.inf, np.inf, np.inf, removed

    kappa = condition_number(system)
    try:
        constants = lebesgue(system)
        error = interp_error(system, exp_field, exp_gradient, np.array([0.5, 0.5]) * spacing)
    except NumericalError as exc:
        logger.debug("alpha=%.6f (%s): %s", alpha, mode, exc)
        return alpha, kappa, np.inf, np.inf, np.inf, removed
    return alpha, kappa, constants.interior, constants.boundary, error, removed


def det_sign(alpha: float, kernel: KernelSpec, basis: PolyBasis, spacing: float) -> float:
    """Sign of det M for the unstabilized reference stencil."""
    nodes, stencil = reference_stencil(alpha, spacing)
    sign, _ = np.linalg.slogdet(assemble(stencil, nodes, kernel, basis).matrix)
    return float(sign)


def singular_alphas(alphas: np.ndarray, signs: np.ndarray, kernel: KernelSpec, basis: PolyBasis,
                    spacing: float) -> List[float]:
    """
    Angles where det M vanishes, located by bisection between neighbouring
    samples whose determinants have opposite signs.
    """
    found = []
    for a, b, sa, sb in zip(alphas[:-1], alphas[1:], signs[:-1], signs[1:]):
        if sa * sb < 0:
            found.append(float(bisect(lambda x: det_sign(x, kernel, basis, spacing), a, b, xtol=SINGULAR_XTOL)))
    return found


class RefSweep(Experiment):
    """
    The unstabilized sweep also carries one row per singular configuration
    found between grid samples, with +inf in every measured column, so that
    the spikes of kappa and of the interpolation error are resolved rather
    than left to the grid.
    """

    name = 'ref-sweep'

    def rows(self, mode: str) -> List[tuple]:
        cfg = self.config
        spacing = cfg.spacing or REFERENCE_SPACING
        kernel = cfg.kernel_spec(spacing)
        basis = self.basis
        alphas = sweep_alphas(cfg.alpha_samples, mode)
        rows = self._map(lambda a: sweep_row(float(a), mode, kernel, basis, spacing, cfg.dmin),
                         alphas, f"ref-sweep {mode}")
        if mode != 'none':
            return rows
        signs = np.array(self._map(lambda a: det_sign(float(a), kernel, basis, spacing), alphas,
                                   "ref-sweep determinant signs"))
        singular = singular_alphas(alphas, signs, kernel, basis, spacing)
        if singular:
            logger.info("none: %d singular configurations at alpha = %s", len(singular),
                        ", ".join(f"{a:.6f}" for a in singular))
        rows.extend((a, np.inf, np.inf, np.inf, np.inf, 0) for a in singular)
        return sorted(rows, key=lambda row: row[0])

    def run(self) -> List[str]:
        written = []
        for mode in MODES_FOR[self.config.mode]:
            rows = self.rows(mode)
            kappas = np.array([row[1] for row in rows])
            failed = int(np.count_nonzero(~np.isfinite([row[4] for row in rows])))
            logger.info("%s: max kappa %.3e over %d samples, %d without a finite error",
                        mode, np.max(kappas), len(rows), failed)
            written.append(self.data.write_csv(f"ref_sweep_{mode}.csv", HEADER, rows))
        return written
