"""
Node set and stencil data models.
"""

from dataclasses import dataclass, field
from typing import Iterable, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

INTERIOR = 0
BOUNDARY = 1


def _frozen_array(values, dtype=float) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class NodeSet:
    """
    Points tagged interior/boundary, with unit outward normals on boundary
    points and the nominal spacing s.

    Normals of interior nodes are stored as zero vectors.
    """

    positions: np.ndarray
    kinds: np.ndarray
    normals: np.ndarray
    spacing: float

    def __post_init__(self):
        positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        n, d = positions.shape
        kinds = np.asarray(self.kinds, dtype=np.int8).reshape(n)
        normals = np.asarray(self.normals, dtype=float).reshape(n, d)

        if not np.isin(kinds, (INTERIOR, BOUNDARY)).all():
            raise ValueError("node kinds must be 0 (interior) or 1 (boundary)")
        if not self.spacing > 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")

        normals = np.where((kinds == BOUNDARY)[:, None], normals, 0.0)
        lengths = np.linalg.norm(normals[kinds == BOUNDARY], axis=1)
        if np.any(np.abs(lengths - 1.0) > 1e-12):
            raise ValueError("boundary normals must have unit length")

        if n > 1:
            pairs = cKDTree(positions).query_pairs(1e-9 * self.spacing)
            if pairs:
                raise ValueError(f"{len(pairs)} coincident node pairs")

        object.__setattr__(self, 'positions', _frozen_array(positions))
        object.__setattr__(self, 'kinds', _frozen_array(kinds, np.int8))
        object.__setattr__(self, 'normals', _frozen_array(normals))
        object.__setattr__(self, 'spacing', float(self.spacing))

    @classmethod
    def from_parts(cls, interior: np.ndarray, boundary: np.ndarray,
                   normals: np.ndarray, spacing: float) -> 'NodeSet':
        """Stack interior nodes first, then boundary nodes."""
        interior = np.asarray(interior, dtype=float)
        boundary = np.asarray(boundary, dtype=float)
        d = interior.shape[-1] if interior.size else boundary.shape[-1]
        interior = interior.reshape(-1, d)
        boundary = boundary.reshape(-1, d)
        normals = np.asarray(normals, dtype=float).reshape(-1, d)
        positions = np.vstack([interior, boundary])
        kinds = np.concatenate([np.full(len(interior), INTERIOR), np.full(len(boundary), BOUNDARY)])
        all_normals = np.vstack([np.zeros_like(interior), normals])
        return cls(positions, kinds, all_normals, spacing)

    def __len__(self) -> int:
        return self.positions.shape[0]

    @property
    def dimension(self) -> int:
        return self.positions.shape[1]

    @property
    def interior_indices(self) -> np.ndarray:
        return np.flatnonzero(self.kinds == INTERIOR)

    @property
    def boundary_indices(self) -> np.ndarray:
        return np.flatnonzero(self.kinds == BOUNDARY)

    @property
    def n_interior(self) -> int:
        return int(np.count_nonzero(self.kinds == INTERIOR))

    @property
    def n_boundary(self) -> int:
        return int(np.count_nonzero(self.kinds == BOUNDARY))

    def is_boundary(self, index: int) -> bool:
        return bool(self.kinds[index] == BOUNDARY)

    def with_positions(self, indices: Sequence[int], positions: np.ndarray,
                       normals: np.ndarray) -> 'NodeSet':
        """Copy with the given boundary nodes moved (and their normals replaced)."""
        new_positions = np.array(self.positions)
        new_normals = np.array(self.normals)
        new_positions[list(indices)] = positions
        new_normals[list(indices)] = normals
        return NodeSet(new_positions, self.kinds, new_normals, self.spacing)


@dataclass(frozen=True)
class Stencil:
    """Index sets of one local interpolation problem (global node indices)."""

    center: int
    interior: Tuple[int, ...] = field(default_factory=tuple)
    boundary: Tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, 'center', int(self.center))
        object.__setattr__(self, 'interior', tuple(int(i) for i in self.interior))
        object.__setattr__(self, 'boundary', tuple(int(i) for i in self.boundary))
        members = self.interior + self.boundary
        if not members:
            raise ValueError("a stencil needs at least one node")
        if len(set(members)) != len(members):
            raise ValueError("stencil indices must be distinct")

    @property
    def m_interior(self) -> int:
        return len(self.interior)

    @property
    def m_boundary(self) -> int:
        return len(self.boundary)

    @property
    def size(self) -> int:
        return len(self.interior) + len(self.boundary)

    @property
    def indices(self) -> Tuple[int, ...]:
        """Interior members first, then boundary members."""
        return self.interior + self.boundary

    def validate(self, nodes: NodeSet):
        """Check every index against the node kinds of `nodes`."""
        n = len(nodes)
        for index in self.indices:
            if not 0 <= index < n:
                raise IndexError(f"stencil index {index} outside node set of size {n}")
        if any(nodes.is_boundary(i) for i in self.interior):
            raise ValueError("interior list references a boundary node")
        if not all(nodes.is_boundary(i) for i in self.boundary):
            raise ValueError("boundary list references an interior node")

    def keep_boundary(self, keep: Iterable[int]) -> 'Stencil':
        """Copy keeping only the boundary members at the given local positions."""
        keep = sorted(set(keep))
        return Stencil(self.center, self.interior, tuple(self.boundary[k] for k in keep))

    def interior_only(self) -> 'Stencil':
        return Stencil(self.center, self.interior, ())

    def points(self, nodes: NodeSet) -> np.ndarray:
        return nodes.positions[list(self.indices)]

    def boundary_normals(self, nodes: NodeSet) -> np.ndarray:
        return nodes.normals[list(self.boundary)].reshape(-1, nodes.dimension)

