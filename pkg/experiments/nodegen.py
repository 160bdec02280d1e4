"""
Node generation for the test domain or the unit disk.
"""

import logging
from typing import List

from config import TEST_DOMAIN_SPACING

from .base import Experiment
from .stability import NodeSets, domain_for

logger = logging.getLogger(__name__)


class NodeGen(Experiment):
    name = 'nodegen'

    def run(self) -> List[str]:
        cfg = self.config
        node_sets = NodeSets(domain_for(cfg), cfg.spacing or TEST_DOMAIN_SPACING)
        nodes = node_sets.nodes(projected=False)
        logger.info("%s domain: %d interior, %d boundary nodes", cfg.domain, nodes.n_interior, nodes.n_boundary)
        written = [self.data.write_node_set("nodes.txt", nodes)]
        self._report_progress("nodegen", 1, 2)
        if cfg.mode in ('project', 'both'):
            projected = node_sets.nodes(projected=True)
            logger.info("projected boundary: %d nodes", projected.n_boundary)
            written.append(self.data.write_node_set("nodes_projected.txt", projected))
        self._report_progress("nodegen", 2, 2)
        return written
