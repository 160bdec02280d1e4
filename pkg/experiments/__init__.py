"""
Experiment commands of the neumann-rbf CLI.
"""

from .base import Experiment
from .directions import Directions
from .nodegen import NodeGen
from .placement import Placement
from .poisson import Poisson
from .ref_sweep import RefSweep
from .stability import Stability
from .vmap import VMap

COMMANDS = {cls.name: cls for cls in (RefSweep, VMap, Directions, Stability, Poisson, Placement, NodeGen)}

__all__ = ['COMMANDS', 'Experiment', 'Directions', 'NodeGen', 'Placement', 'Poisson', 'RefSweep',
           'Stability', 'VMap']
