"""
Radial basis function families and the multivariate polynomial basis.

Every evaluation accepts scalars or numpy arrays. The batched helpers
(`gradient_field`, `laplacian_field`, `hessian_field`) take arrays of
difference vectors x - c with the coordinate on the last axis; they are
what matrix assembly uses.
"""

import itertools
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from math import comb
from typing import Tuple, Union

import numpy as np

from exceptions import KernelDomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

_NAME_PATTERN = re.compile(r'^(ga|mq|imq|iq|phs(\d+)|tps(\d+))$')


class Family(str, Enum):
    GA = 'ga'
    MQ = 'mq'
    IMQ = 'imq'
    IQ = 'iq'
    PHS = 'phs'
    TPS = 'tps'


SMOOTH_FAMILIES = (Family.GA, Family.MQ, Family.IMQ, Family.IQ)


@dataclass(frozen=True)
class KernelSpec:
    """
    An RBF family with its shape parameter.

    For PHS the kernel is r^(2k+1), for TPS it is r^(2k) log r; `order`
    holds k and `shape` is ignored. Both require k >= 1 so that
    Phi'(0) = 0, which boundary-derivative rows rely on.
    """

    family: Family
    shape: float = 1.0
    order: int = 1

    def __post_init__(self):
        object.__setattr__(self, 'family', Family(self.family))
        if self.family in SMOOTH_FAMILIES:
            if not np.isfinite(self.shape) or self.shape <= 0:
                raise KernelDomainError(f"shape parameter must be positive, got {self.shape}")
        elif self.order < 1:
            raise KernelDomainError(
                f"{self.family.value} needs k >= 1 so that Phi'(0) = 0, got k={self.order}"
            )

    @classmethod
    def from_name(cls, name: str, eps_s: float = 1.0, spacing: float = 1.0) -> 'KernelSpec':
        """
        Parse a kernel name (ga, mq, imq, iq, phs<odd>, tps<k>).

        Args:
            name: Kernel name as used in config files and flags
            eps_s: Dimensionless shape factor
            spacing: Node spacing s; the shape parameter is eps_s / s
        """
        match = _NAME_PATTERN.match(name.strip().lower())
        if not match:
            raise KernelDomainError(f"unknown kernel '{name}'")
        if match.group(2) is not None:
            exponent = int(match.group(2))
            if exponent % 2 == 0 or exponent < 3:
                raise KernelDomainError(
                    f"phs exponent must be odd and at least 3, got {exponent}"
                )
            return cls(Family.PHS, order=(exponent - 1) // 2)
        if match.group(3) is not None:
            return cls(Family.TPS, order=int(match.group(3)))
        if spacing <= 0:
            raise KernelDomainError(f"spacing must be positive, got {spacing}")
        return cls(Family(match.group(1)), shape=eps_s / spacing)

    @property
    def name(self) -> str:
        if self.family == Family.PHS:
            return f"phs{2 * self.order + 1}"
        if self.family == Family.TPS:
            return f"tps{self.order}"
        return self.family.value

    @property
    def conditional_order(self) -> int:
        """Order of conditional positive definiteness (0 means strictly PD)."""
        if self.family in (Family.GA, Family.IMQ, Family.IQ):
            return 0
        if self.family == Family.MQ:
            return 1
        return self.order + 1

    @property
    def is_smooth(self) -> bool:
        return self.family in SMOOTH_FAMILIES


def _as_radius(r: ArrayLike) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)) or np.any(r < 0):
        raise KernelDomainError("radius must be finite and non-negative")
    return r


def _finish(value: np.ndarray, scalar: bool) -> ArrayLike:
    if not np.all(np.isfinite(value)):
        raise KernelDomainError("non-finite kernel value")
    return float(value) if scalar else value


def _safe_log(r: np.ndarray) -> np.ndarray:
    return np.log(np.where(r > 0, r, 1.0))


def _tps_singular_at_zero(kernel: KernelSpec, r: np.ndarray) -> bool:
    return kernel.family == Family.TPS and kernel.order == 1 and bool(np.any(r == 0))


def phi(kernel: KernelSpec, r: ArrayLike) -> ArrayLike:
    """Evaluate Phi(r)."""
    scalar = np.ndim(r) == 0
    r = _as_radius(r)
    eps = kernel.shape
    a2 = (eps * r) ** 2
    if kernel.family == Family.GA:
        value = np.exp(-a2)
    elif kernel.family == Family.MQ:
        value = np.sqrt(1.0 + a2)
    elif kernel.family == Family.IMQ:
        value = 1.0 / np.sqrt(1.0 + a2)
    elif kernel.family == Family.IQ:
        value = 1.0 / (1.0 + a2)
    elif kernel.family == Family.PHS:
        value = r ** (2 * kernel.order + 1)
    else:
        value = r ** (2 * kernel.order) * _safe_log(r)
    return _finish(value, scalar)


def phi_prime(kernel: KernelSpec, r: ArrayLike) -> ArrayLike:
    """Evaluate Phi'(r); exactly 0 at r = 0."""
    scalar = np.ndim(r) == 0
    r = _as_radius(r)
    eps = kernel.shape
    a2 = (eps * r) ** 2
    if kernel.family == Family.GA:
        value = -2.0 * eps ** 2 * r * np.exp(-a2)
    elif kernel.family == Family.MQ:
        value = eps ** 2 * r / np.sqrt(1.0 + a2)
    elif kernel.family == Family.IMQ:
        value = -(eps ** 2) * r * (1.0 + a2) ** -1.5
    elif kernel.family == Family.IQ:
        value = -2.0 * eps ** 2 * r * (1.0 + a2) ** -2
    elif kernel.family == Family.PHS:
        p = 2 * kernel.order + 1
        value = p * r ** (p - 1)
    else:
        k = kernel.order
        value = r ** (2 * k - 1) * (2 * k * _safe_log(r) + 1.0)
    value = np.where(r == 0, 0.0, value)
    return _finish(value, scalar)


def phi_second(kernel: KernelSpec, r: ArrayLike) -> ArrayLike:
    """Evaluate Phi''(r). TPS with k = 1 has no finite value at r = 0."""
    scalar = np.ndim(r) == 0
    r = _as_radius(r)
    if _tps_singular_at_zero(kernel, r):
        raise KernelDomainError("r^2 log r has no finite second derivative at r = 0")
    eps = kernel.shape
    a2 = (eps * r) ** 2
    if kernel.family == Family.GA:
        value = (-2.0 * eps ** 2 + 4.0 * eps ** 4 * r ** 2) * np.exp(-a2)
    elif kernel.family == Family.MQ:
        value = eps ** 2 * (1.0 + a2) ** -1.5
    elif kernel.family == Family.IMQ:
        value = eps ** 2 * (2.0 * a2 - 1.0) * (1.0 + a2) ** -2.5
    elif kernel.family == Family.IQ:
        value = 2.0 * eps ** 2 * (3.0 * a2 - 1.0) * (1.0 + a2) ** -3
    elif kernel.family == Family.PHS:
        p = 2 * kernel.order + 1
        value = p * (p - 1) * r ** (p - 2)
    else:
        k = kernel.order
        value = r ** (2 * k - 2) * (2 * k * (2 * k - 1) * _safe_log(r) + 4 * k - 1)
        value = np.where(r == 0, 0.0, value)
    return _finish(value, scalar)


def phi_prime_over_r(kernel: KernelSpec, r: ArrayLike) -> ArrayLike:
    """Evaluate Phi'(r)/r, with the limit Phi''(0) at r = 0."""
    scalar = np.ndim(r) == 0
    r = _as_radius(r)
    if _tps_singular_at_zero(kernel, r):
        raise KernelDomainError("Phi'(r)/r of r^2 log r is unbounded at r = 0")
    eps = kernel.shape
    a2 = (eps * r) ** 2
    if kernel.family == Family.GA:
        value = -2.0 * eps ** 2 * np.exp(-a2)
    elif kernel.family == Family.MQ:
        value = eps ** 2 / np.sqrt(1.0 + a2)
    elif kernel.family == Family.IMQ:
        value = -(eps ** 2) * (1.0 + a2) ** -1.5
    elif kernel.family == Family.IQ:
        value = -2.0 * eps ** 2 * (1.0 + a2) ** -2
    elif kernel.family == Family.PHS:
        p = 2 * kernel.order + 1
        value = p * r ** (p - 2)
    else:
        k = kernel.order
        value = r ** (2 * k - 2) * (2 * k * _safe_log(r) + 1.0)
        value = np.where(r == 0, 0.0, value)
    return _finish(value, scalar)


def _radii(diffs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Norms of difference vectors and the matching unit vectors (zero at r = 0)."""
    r = np.linalg.norm(diffs, axis=-1)
    safe = np.where(r > 0, r, 1.0)
    unit = np.where((r > 0)[..., None], diffs / safe[..., None], 0.0)
    return r, unit


def gradient_field(kernel: KernelSpec, diffs: np.ndarray) -> np.ndarray:
    """Gradients Phi'(r) e for difference vectors x - c, shape (..., d)."""
    r, unit = _radii(np.asarray(diffs, dtype=float))
    return np.asarray(phi_prime(kernel, r))[..., None] * unit


def laplacian_field(kernel: KernelSpec, diffs: np.ndarray) -> np.ndarray:
    """Laplacians Phi'' + (d-1) Phi'/r for difference vectors x - c."""
    diffs = np.asarray(diffs, dtype=float)
    d = diffs.shape[-1]
    r, _ = _radii(diffs)
    return phi_second(kernel, r) + (d - 1) * phi_prime_over_r(kernel, r)


def hessian_field(kernel: KernelSpec, diffs: np.ndarray) -> np.ndarray:
    """Hessians Phi'' e e^T + Phi'/r (I - e e^T), shape (..., d, d)."""
    diffs = np.asarray(diffs, dtype=float)
    d = diffs.shape[-1]
    r, unit = _radii(diffs)
    over_r = np.asarray(phi_prime_over_r(kernel, r))
    radial = np.asarray(phi_second(kernel, r) - over_r)
    outer = unit[..., :, None] * unit[..., None, :]
    return over_r[..., None, None] * np.eye(d) + radial[..., None, None] * outer


def _check_points(center, x) -> np.ndarray:
    center = np.asarray(center, dtype=float)
    x = np.asarray(x, dtype=float)
    if center.shape != x.shape or center.ndim != 1:
        raise ValueError(f"points must share one dimension, got {center.shape} and {x.shape}")
    return x - center


def rbf_gradient(kernel: KernelSpec, center, x) -> np.ndarray:
    """Gradient at x of the RBF centered at `center`."""
    return gradient_field(kernel, _check_points(center, x))


def rbf_laplacian(kernel: KernelSpec, center, x) -> float:
    """Laplacian at x of the RBF centered at `center`."""
    return float(laplacian_field(kernel, _check_points(center, x)))


def rbf_hessian(kernel: KernelSpec, center, x) -> np.ndarray:
    """Hessian at x of the RBF centered at `center`."""
    return hessian_field(kernel, _check_points(center, x))


def _graded_lex(degree: int, dimension: int) -> Tuple[Tuple[int, ...], ...]:
    exponents = []
    for total in range(degree + 1):
        level = [e for e in itertools.product(range(total + 1), repeat=dimension) if sum(e) == total]
        exponents.extend(sorted(level, reverse=True))
    return tuple(exponents)


@dataclass(frozen=True)
class PolyBasis:
    """
    Monomials of total degree <= P in graded-lexicographic order.

    Degree -1 is the empty basis (no polynomial augmentation).
    """

    degree: int
    dimension: int = 2
    exponents: Tuple[Tuple[int, ...], ...] = field(init=False, repr=False)

    def __post_init__(self):
        if self.degree < -1:
            raise ValueError(f"polynomial degree must be >= -1, got {self.degree}")
        if self.dimension < 1:
            raise ValueError(f"dimension must be positive, got {self.dimension}")
        object.__setattr__(self, 'exponents', _graded_lex(self.degree, self.dimension))

    @property
    def size(self) -> int:
        if self.degree < 0:
            return 0
        return comb(self.degree + self.dimension, self.dimension)

    @property
    def powers(self) -> np.ndarray:
        return np.array(self.exponents, dtype=int).reshape(-1, self.dimension)

    def _check_index(self, j: int):
        if not 0 <= j < self.size:
            raise IndexError(f"monomial index {j} out of range for q={self.size}")

    def values(self, points: np.ndarray) -> np.ndarray:
        """Monomial values, shape (n, q)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.prod(points[:, None, :] ** self.powers[None, :, :], axis=-1)

    def gradients(self, points: np.ndarray) -> np.ndarray:
        """Monomial gradients, shape (n, q, d)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        powers = self.powers
        out = np.zeros((points.shape[0], self.size, self.dimension))
        for eta in range(self.dimension):
            lowered = powers.copy()
            lowered[:, eta] = np.maximum(lowered[:, eta] - 1, 0)
            terms = np.prod(points[:, None, :] ** lowered[None, :, :], axis=-1)
            out[:, :, eta] = powers[:, eta] * terms
        return out

    def laplacians(self, points: np.ndarray) -> np.ndarray:
        """Monomial Laplacians, shape (n, q)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        powers = self.powers
        out = np.zeros((points.shape[0], self.size))
        for eta in range(self.dimension):
            lowered = powers.copy()
            lowered[:, eta] = np.maximum(lowered[:, eta] - 2, 0)
            terms = np.prod(points[:, None, :] ** lowered[None, :, :], axis=-1)
            out += powers[:, eta] * (powers[:, eta] - 1) * terms
        return out

    def evaluate(self, j: int, x) -> float:
        self._check_index(j)
        return float(self.values(x)[0, j])

    def gradient(self, j: int, x) -> np.ndarray:
        self._check_index(j)
        return self.gradients(x)[0, j]

    def laplacian(self, j: int, x) -> float:
        self._check_index(j)
        return float(self.laplacians(x)[0, j])


def poly_eval(basis: PolyBasis, j: int, x) -> float:
    return basis.evaluate(j, x)


def poly_gradient(basis: PolyBasis, j: int, x) -> np.ndarray:
    return basis.gradient(j, x)


def poly_laplacian(basis: PolyBasis, j: int, x) -> float:
    return basis.laplacian(j, x)
