from .nodes import BOUNDARY, INTERIOR, NodeSet, Stencil
from .run_config import RunConfig

__all__ = ['BOUNDARY', 'INTERIOR', 'NodeSet', 'Stencil', 'RunConfig']
