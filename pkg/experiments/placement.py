"""
Optimal placement of the reference-stencil boundary nodes, compared with
the projected layout.
"""

import logging
from typing import List

import numpy as np

from config import REFERENCE_SPACING
from exceptions import NumericalError
from stabilize import optimize_reference_stencil, project_reference_stencil

from .base import Experiment

logger = logging.getLogger(__name__)

ALPHAS = (-np.pi / 12, 0.0, np.pi / 12)

POSITIONS_HEADER = ('alpha', 'node', 'x', 'y', 'nx', 'ny')
HISTORY_HEADER = ('alpha', 'iter', 'cost')
PROJECTED_HEADER = ('alpha', 'node', 'x', 'y')
SUMMARY_HEADER = ('alpha', 'initial_cost', 'final_cost', 'merged')


class Placement(Experiment):
    name = 'appendixc'

    def place(self, alpha: float):
        cfg = self.config
        spacing = cfg.spacing or REFERENCE_SPACING
        kernel = cfg.kernel_spec(spacing)
        try:
            result = optimize_reference_stencil(alpha, kernel, spacing)
        except NumericalError as exc:
            logger.warning("alpha=%.6f: position optimization failed: %s", alpha, exc)
            result = None
        projected, stencil, _ = project_reference_stencil(alpha, spacing)
        return result, projected.positions[list(stencil.boundary)]

    def run(self) -> List[str]:
        positions, history, projected, summary = [], [], [], []
        for alpha, (result, feet) in zip(ALPHAS, self._map(self.place, ALPHAS, "appendixc")):
            projected.extend((alpha, k, x, y) for k, (x, y) in enumerate(feet))
            if result is None:
                summary.append((alpha, np.inf, np.inf, 0))
                continue
            nodes = result.nodes
            for k, index in enumerate(result.stencil.boundary):
                (x, y), (nx, ny) = nodes.positions[index], nodes.normals[index]
                positions.append((alpha, k, x, y, nx, ny))
            history.extend((alpha, i, cost) for i, cost in enumerate(result.history))
            summary.append((alpha, result.history[0], result.history[-1], result.merged))
            logger.info("alpha=%.4f: cost %.6g -> %.6g, %d merged",
                        alpha, result.history[0], result.history[-1], result.merged)
        return [
            self.data.write_csv("appendixc_positions.csv", POSITIONS_HEADER, positions),
            self.data.write_csv("appendixc_history.csv", HISTORY_HEADER, history),
            self.data.write_csv("appendixc_projected.csv", PROJECTED_HEADER, projected),
            self.data.write_csv("appendixc_summary.csv", SUMMARY_HEADER, summary),
        ]
