"""Complex sparse storage and direct LU solves.

Matrices are ``scipy.sparse.csr_matrix`` with sorted, duplicate-free
indices. Factorization is SuperLU with COLAMD column ordering and threshold
partial pivoting; no iterative refinement is applied.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp
from scipy.sparse.linalg import splu

__all__ = [
    "SingularMatrixError",
    "NearSingularWarning",
    "Factorization",
    "as_csr",
    "check_csr",
    "matvec",
    "factor",
    "solve",
    "relative_residual",
    "dump_matrix_market",
]

log = logging.getLogger(__name__)


class SingularMatrixError(ArithmeticError):
    pass


class NearSingularWarning(RuntimeWarning):
    pass


def as_csr(A) -> sp.csr_matrix:
    """Canonical complex CSR copy of ``A``."""
    out = sp.csr_matrix(A, dtype=complex, copy=True)
    out.sum_duplicates()
    out.sort_indices()
    return out


def check_csr(A: sp.csr_matrix) -> None:
    """Assert the storage invariants (monotone offsets, sorted unique columns)."""
    indptr, indices = A.indptr, A.indices
    n_rows, n_cols = A.shape
    if indptr[0] != 0 or np.any(np.diff(indptr) < 0) or indptr[-1] != len(indices):
        raise ValueError("row offsets are not monotone")
    if indices.size and (indices.min() < 0 or indices.max() >= n_cols):
        raise ValueError("column index out of range")
    for r in range(n_rows):
        cols = indices[indptr[r]:indptr[r + 1]]
        if np.any(np.diff(cols) <= 0):
            raise ValueError(f"row {r}: column indices not strictly increasing")


def matvec(A, x) -> np.ndarray:
    x = np.asarray(x)
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape} @ {x.shape}")
    return A @ x


@dataclass(frozen=True, eq=False)
class Factorization:
    """LU factors of one matrix, reusable for any number of right-hand sides."""

    lu: object
    shape: tuple
    pivot_ratio: float

    def solve(self, b) -> np.ndarray:
        return solve(self, b)


def factor(A, pivot_threshold: float = 0.1) -> Factorization:
    """Sparse LU with fill-reducing ordering and threshold partial pivoting."""
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    A = sp.csc_matrix(A, dtype=complex)
    try:
        lu = splu(A, permc_spec="COLAMD", diag_pivot_thresh=pivot_threshold)
    except RuntimeError as exc:
        raise SingularMatrixError(f"LU factorization failed: {exc}") from exc
    diag = np.abs(lu.U.diagonal())
    ratio = float(diag.min() / diag.max()) if diag.size else 1.0
    if ratio < 1e-14:
        stage = int(np.argmin(diag))
        warnings.warn(f"near-singular matrix: pivot {stage} has relative magnitude {ratio:.2e}",
                      NearSingularWarning, stacklevel=2)
    return Factorization(lu, A.shape, ratio)


def solve(F: Factorization, b) -> np.ndarray:
    b = np.asarray(b, dtype=complex)
    if b.shape[0] != F.shape[0]:
        raise ValueError(f"dimension mismatch: factor {F.shape} vs rhs {b.shape}")
    return F.lu.solve(b)


def relative_residual(A, x, b) -> float:
    nb = np.linalg.norm(b)
    r = np.linalg.norm(A @ x - b)
    return float(r / nb) if nb > 0 else float(r)


def dump_matrix_market(A, path) -> None:
    """Write ``A`` in Matrix Market coordinate format (for debugging)."""
    scipy.io.mmwrite(str(path), sp.coo_matrix(A))
