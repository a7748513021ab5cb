"""Dense SVD and symmetric eigendecomposition for small solver matrices.

Thin wrappers over LAPACK (via numpy) that pin down the output conventions
the rest of the package relies on: full orthogonal factors, singular values
sorted non-increasing, eigenvalues sorted non-decreasing, and reconstruction
accurate to 1e-10 relative on the matrix sizes used here (<= ~32x32).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SvdResult:
    U: np.ndarray  # (m, m) orthogonal
    S: np.ndarray  # (min(m, n),) non-negative, non-increasing
    V: np.ndarray  # (n, n) orthogonal; A = U @ diag(S) @ V.T


@dataclass(frozen=True)
class EigResult:
    Q: np.ndarray  # (n, n) orthogonal
    lam: np.ndarray  # (n,) non-decreasing; A = Q @ diag(lam) @ Q.T


def svd(A) -> SvdResult:
    """Full singular value decomposition A = U diag(S) V^T."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {A.shape}")
    if not np.isfinite(A).all():
        raise ValueError("matrix has non-finite entries")
    U, S, Vh = np.linalg.svd(A, full_matrices=True)
    return SvdResult(U=U, S=S, V=Vh.T)


def sym_eig(A) -> EigResult:
    """Eigendecomposition of a (numerically) symmetric matrix.

    The input is symmetrized as (A + A^T) / 2 before factorization;
    callers are expected to pass matrices that are symmetric up to
    round-off.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.isfinite(A).all():
        raise ValueError("matrix has non-finite entries")
    lam, Q = np.linalg.eigh((A + A.T) / 2.0)
    return EigResult(Q=Q, lam=lam)
