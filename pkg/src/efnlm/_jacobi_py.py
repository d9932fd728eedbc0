"""Pure-numpy cyclic Jacobi diagonalization.

Fallback for the compiled kernel in ``_jacobi.pyx``; both implement the same
fixed sweep order so either backend is deterministic on its own.
"""
import math

import numpy as np

MAX_SWEEPS = 64


def jacobi_eigh(S):
    """Diagonalize symmetric S by cyclic Jacobi sweeps.

    Returns (eigenvalues, eigenvector columns), unsorted. Raises ValueError
    if the off-diagonal norm has not dropped below the (relative) threshold
    after MAX_SWEEPS sweeps.
    """
    A = np.array(S, dtype=np.float64, order="C", copy=True)
    n = A.shape[0]
    V = np.eye(n)
    if n < 2:
        return np.diag(A).copy(), V

    tol = 1e-12 * max(float(np.linalg.norm(A)), np.finfo(np.float64).tiny)
    idx = np.arange(n)
    for _ in range(MAX_SWEEPS):
        off = A.copy()
        off[idx, idx] = 0.0
        if float(np.linalg.norm(off)) < tol:
            return np.diag(A).copy(), V
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c

                app, aqq = A[p, p], A[q, q]
                col_p = A[:, p].copy()
                col_q = A[:, q].copy()
                new_p = c * col_p - s * col_q
                new_q = s * col_p + c * col_q
                A[:, p] = new_p
                A[:, q] = new_q
                A[p, :] = new_p
                A[q, :] = new_q
                A[p, p] = app - t * apq
                A[q, q] = aqq + t * apq
                A[p, q] = 0.0
                A[q, p] = 0.0

                vcol_p = V[:, p].copy()
                V[:, p] = c * vcol_p - s * V[:, q]
                V[:, q] = s * vcol_p + c * V[:, q]

    off = A.copy()
    off[idx, idx] = 0.0
    if float(np.linalg.norm(off)) < tol:
        return np.diag(A).copy(), V
    raise ValueError("Jacobi sweeps did not converge")
