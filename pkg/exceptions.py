"""
Exception hierarchy for neumann-rbf.

ConfigError maps to CLI exit code 2, every NumericalError to exit code 3.
"""

from typing import Optional


class NeumannRBFError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(NeumannRBFError):
    """Invalid run configuration or command-line flags."""


class NumericalError(NeumannRBFError):
    """A computation could not be carried out."""


class KernelDomainError(NumericalError, ValueError):
    """Kernel evaluated outside its domain or rejected for an operation."""


class SingularAssemblyError(NumericalError):
    """Local matrix is structurally singular (duplicate nodes, singular phi_II)."""


class ConditioningError(NumericalError):
    """Local matrix is numerically singular."""

    def __init__(self, kappa: float, node: Optional[int] = None, message: str = ""):
        self.kappa = kappa
        self.node = node
        if not message:
            message = f"interpolation matrix numerically singular (kappa ~ {kappa:.3e})"
            if node is not None:
                message += f" at stencil centered on node {node}"
        super().__init__(message)


class UnisolvencyError(NumericalError):
    """Interior stencil nodes do not determine the polynomial space."""


class ProjectionError(NumericalError):
    """Boundary projection found no first-layer interior nodes."""


class SolverError(NumericalError):
    """Sparse factorization or solve broke down."""
