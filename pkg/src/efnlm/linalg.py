"""Dense symmetric linear algebra kernel.

Solves, SPD inversion and the deterministic symmetric eigendecomposition the
residual machinery is built on. The eigendecomposition runs cyclic Jacobi
sweeps; the compiled kernel is used when available and a numpy fallback
otherwise (``JACOBI_BACKEND`` records which one was selected at import).
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NoConvergence, NotPositiveDefinite, NotSymmetric

try:
    from . import _jacobi as _jacobi_impl

    JACOBI_BACKEND = "compiled"
except ImportError:
    from . import _jacobi_py as _jacobi_impl

    JACOBI_BACKEND = "python"

_SYM_RTOL = 1e-10


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues sorted descending with aligned orthonormal eigenvector columns.

    Sign convention: in each eigenvector the entry of largest absolute value
    is positive (ties broken by lowest index).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _check_symmetric(S):
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {S.shape}")
    scale = max(float(np.max(np.abs(S))), 1.0) if S.size else 1.0
    if S.size and float(np.max(np.abs(S - S.T))) > _SYM_RTOL * scale:
        raise NotSymmetric("matrix is not symmetric within 1e-10 relative")
    return S


def solve_spd(A, B):
    """Solve A X = B for symmetric positive-definite A.

    Raises NotPositiveDefinite when the Cholesky factorization hits a
    non-positive pivot, DimensionMismatch on non-conforming shapes.
    """
    A = _check_symmetric(A)
    B = np.asarray(B, dtype=np.float64)
    if B.shape[0] != A.shape[0]:
        raise DimensionMismatch(f"A is {A.shape}, B has leading dimension {B.shape[0]}")
    try:
        c, low = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    return scipy.linalg.cho_solve((c, low), B, check_finite=False)


def inv_spd(A):
    """Inverse of a symmetric positive-definite matrix, symmetrized."""
    A = np.asarray(A, dtype=np.float64)
    inv = solve_spd(A, np.eye(A.shape[0]))
    return 0.5 * (inv + inv.T)


def trace(S):
    """Sum of diagonal entries of a square matrix."""
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {S.shape}")
    return float(np.trace(S))


def sym_eigen(S):
    """Deterministic eigendecomposition of a symmetric matrix.

    Eigenvalues are sorted descending (stable sort, so the Jacobi output
    order breaks exact ties) and each eigenvector is oriented so its
    largest-magnitude entry is positive.
    """
    S = _check_symmetric(S)
    try:
        vals, vecs = _jacobi_impl.jacobi_eigh(S)
    except ValueError as exc:
        raise NoConvergence(str(exc)) from None
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    for j in range(vecs.shape[1]):
        k = int(np.argmax(np.abs(vecs[:, j])))
        if vecs[k, j] < 0.0:
            vecs[:, j] = -vecs[:, j]
    return EigenDecomposition(eigenvalues=vals, eigenvectors=vecs)
