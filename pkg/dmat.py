"""
Matrices whose entries are d-dimensional vectors, and the operator H that
contracts each row against a vector: H(A, V)_ij = a_ij . v_i.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True, eq=False)
class DMat:
    """An m x n array of d-vectors, stored densely as shape (m, n, d)."""

    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        if entries.ndim != 3:
            raise ValueError(f"d-matrix entries need shape (m, n, d), got {entries.shape}")
        entries.setflags(write=False)
        object.__setattr__(self, 'entries', entries)

    @classmethod
    def column(cls, vectors: Sequence) -> 'DMat':
        """m x 1 d-matrix from m vectors (normals are passed this way)."""
        vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
        return cls(vectors[:, None, :])

    @property
    def shape(self):
        return self.entries.shape[:2]

    @property
    def dimension(self) -> int:
        return self.entries.shape[2]

    @property
    def vectors(self) -> np.ndarray:
        """Entries of an m x 1 d-matrix as an (m, d) array."""
        if self.entries.shape[1] != 1:
            raise ValueError("only column d-matrices hold a vector per row")
        return self.entries[:, 0, :]

    def __getitem__(self, index) -> np.ndarray:
        return self.entries[index]

    def submatrix(self, rows: Sequence[int], cols: Sequence[int]) -> 'DMat':
        return DMat(self.entries[np.ix_(list(rows), list(cols))])


def dmat_scale(a: DMat, factor: float) -> DMat:
    return DMat(factor * a.entries)


def dmat_add(a: DMat, b: DMat) -> DMat:
    if a.entries.shape != b.entries.shape:
        raise ValueError(f"cannot add d-matrices of shapes {a.entries.shape} and {b.entries.shape}")
    return DMat(a.entries + b.entries)


def dmat_matmul(a: DMat, q: np.ndarray) -> DMat:
    """(AQ)_ij = sum_k a_ik q_kj for a real matrix Q."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    if a.shape[1] != q.shape[0]:
        raise ValueError(f"cannot multiply {a.shape} d-matrix by {q.shape} matrix")
    return DMat(np.einsum('ikd,kj->ijd', a.entries, q))


def op_H(a: DMat, v: DMat) -> np.ndarray:
    """Contract row i of A against v_i."""
    vectors = v.vectors
    if a.shape[0] != vectors.shape[0] or a.dimension != v.dimension:
        raise ValueError(f"operator H needs matching rows and dimension, got {a.entries.shape} and {v.entries.shape}")
    return np.einsum('ijd,id->ij', a.entries, vectors)


def det_H_partial(a: DMat, v: DMat, i: int, eta: int) -> float:
    """d/dv_{i,eta} det H(A, V): the determinant with v_i replaced by e_eta."""
    m, n = a.shape
    if m != n:
        raise ValueError("det_H_partial needs a square d-matrix")
    if not 0 <= i < m:
        raise IndexError(f"row {i} out of range for {m} rows")
    if not 0 <= eta < a.dimension:
        raise IndexError(f"coordinate {eta} out of range for dimension {a.dimension}")
    vectors = np.array(v.vectors)
    vectors[i] = 0.0
    vectors[i, eta] = 1.0
    return float(np.linalg.det(op_H(a, DMat.column(vectors))))
