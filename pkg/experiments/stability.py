"""
Stability map of the repeated Helmholtz-Hodge decomposition over
(P, eps_s, d_min) on the test domain.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from config import STABILITY_ORDERS, TEST_DOMAIN_SPACING
from exceptions import NumericalError
from geometry import Domain2D, build_stencils, generate_nodes, test_domain, unit_disk
from kernels import KernelSpec, PolyBasis
from models.nodes import NodeSet
from models.run_config import RunConfig
from pde import Discretization, classify_stability, field_origin, hhd_iterate, vortex_field
from stabilize import SelectionConfig, project_boundary_nodes

from .base import Experiment

logger = logging.getLogger(__name__)

HEADER = ('P', 'eps_s', 'dmin', 'stable', 'growth')
HISTORY_HEADER = ('iter', 'div_norm', 'sup_norm')


@dataclass(frozen=True)
class Variant:
    """A node-set treatment: plain or projected boundary, and the d_min values to run."""

    label: str
    projected: bool
    dmins: Tuple[float, ...]


def domain_for(config: RunConfig) -> Domain2D:
    return test_domain() if config.domain == 'test' else unit_disk()


def variants_for(config: RunConfig) -> List[Variant]:
    none = Variant('none', False, (0.0,))
    select = Variant('select', False, config.dmin_grid)
    project = Variant('project', True, config.dmin_grid)
    return {
        'none': [none],
        'select': [select],
        'project': [project],
        'both': [none, select, project],
    }[config.mode]


def selection_for(d_min: float) -> Optional[SelectionConfig]:
    return SelectionConfig(d_min) if d_min > 0 else None


class NodeSets:
    """Plain and projected node sets of one domain, generated once and reused."""

    def __init__(self, domain: Domain2D, spacing: float):
        self.domain = domain
        self.spacing = spacing
        self._nodes: Dict[bool, NodeSet] = {}

    def nodes(self, projected: bool) -> NodeSet:
        if False not in self._nodes:
            self._nodes[False] = generate_nodes(self.domain, self.spacing)
        if projected and True not in self._nodes:
            self._nodes[True] = project_boundary_nodes(self._nodes[False], self.domain)
        return self._nodes[projected]

    def discretization(self, projected: bool, m_interior: int) -> Discretization:
        nodes = self.nodes(projected)
        return Discretization(nodes, tuple(build_stencils(nodes, m_interior)), projected,
                              field_origin(self.domain))


class Stability(Experiment):
    name = 'stability'

    def run_case(self, disc: Discretization, degree: int, eps_s: float, d_min: float, tag: str):
        cfg = self.config
        kernel = KernelSpec.from_name(cfg.kernel, eps_s, disc.nodes.spacing)
        interior = disc.nodes.positions[disc.nodes.interior_indices]
        w = vortex_field(interior, np.asarray(disc.origin))
        try:
            state = hhd_iterate(disc.nodes, disc.stencils, kernel, PolyBasis(degree), selection_for(d_min), w,
                                cfg.n_iter, skip_singular=cfg.skip_singular, workers=1)
        except NumericalError as exc:
            logger.warning("%s P=%d eps_s=%g d_min=%g failed: %s", tag, degree, eps_s, d_min, exc)
            return (degree, eps_s, d_min, False, np.inf), []
        verdict = classify_stability(state)
        logger.info("%s P=%d eps_s=%g d_min=%g: growth %.3g (%s)", tag, degree, eps_s, d_min, verdict.growth,
                    verdict.label)
        history = [(i + 1, d, s) for i, (d, s) in enumerate(zip(state.div_norm_history, state.sup_norm_history))]
        return (degree, eps_s, d_min, verdict.stable, verdict.growth), history

    def run(self) -> List[str]:
        cfg = self.config
        node_sets = NodeSets(domain_for(cfg), cfg.spacing or TEST_DOMAIN_SPACING)
        written = []
        for variant in variants_for(cfg):
            cases = []
            for degree, m_interior in sorted(STABILITY_ORDERS.items()):
                disc = node_sets.discretization(variant.projected, m_interior)
                cases.extend((disc, degree, eps_s, d_min) for eps_s in cfg.eps_grid for d_min in variant.dmins)
            results = self._map(lambda case: self.run_case(*case, variant.label), cases,
                                f"stability {variant.label}")
            for (_, degree, eps_s, d_min), (_, history) in zip(cases, results):
                name = f"hhd_history_{variant.label}_P{degree}_eps{eps_s:g}_dmin{d_min:g}.csv"
                written.append(self.data.write_csv(name, HISTORY_HEADER, history))
            written.append(self.data.write_csv(f"stability_{variant.label}.csv", HEADER, [r for r, _ in results]))
        return written
