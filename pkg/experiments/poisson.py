"""
Pure-Neumann Poisson accuracy for u = 1/r against d_min, plus a refinement pair.
"""

import logging
from typing import List

import numpy as np

from config import TEST_DOMAIN_SPACING
from exceptions import NumericalError
from pde import solve_manufactured_poisson

from .base import Experiment
from .stability import NodeSets, domain_for, selection_for, variants_for

logger = logging.getLogger(__name__)

HEADER = ('P', 'eps_s', 'dmin', 'nrmse')
REFINEMENT_HEADER = ('spacing', 'N_I', 'nrmse')


class Poisson(Experiment):
    name = 'poisson'

    def error(self, disc, d_min: float) -> float:
        cfg = self.config
        kernel = cfg.kernel_spec(disc.nodes.spacing)
        try:
            _, _, value = solve_manufactured_poisson(disc, kernel, self.basis, selection_for(d_min),
                                                     cfg.skip_singular, workers=1)
        except NumericalError as exc:
            logger.warning("poisson d_min=%g failed: %s", d_min, exc)
            return np.inf
        return value

    def run(self) -> List[str]:
        cfg = self.config
        domain = domain_for(cfg)
        spacing = cfg.spacing or TEST_DOMAIN_SPACING
        node_sets = NodeSets(domain, spacing)
        written = []
        for variant in variants_for(cfg):
            disc = node_sets.discretization(variant.projected, cfg.mi)
            errors = self._map(lambda d: self.error(disc, d), variant.dmins, f"poisson {variant.label}")
            rows = [(cfg.poly, cfg.eps_s, d, e) for d, e in zip(variant.dmins, errors)]
            written.append(self.data.write_csv(f"poisson_{variant.label}.csv", HEADER, rows))

        refinement = []
        for index, h in enumerate((spacing, spacing / 2.0)):
            disc = (node_sets if index == 0 else NodeSets(domain, h)).discretization(False, cfg.mi)
            refinement.append((h, disc.nodes.n_interior, self.error(disc, cfg.dmin)))
            self._report_progress("poisson refinement", index + 1, 2)
        written.append(self.data.write_csv("poisson_refinement.csv", REFINEMENT_HEADER, refinement))
        return written
