# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled cyclic Jacobi diagonalization (hot kernel).

Mirrors the algorithm in ``_jacobi_py.py``: same sweep order, same
relative off-diagonal stopping rule, same sweep budget.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

DEF MAX_SWEEPS = 64


def jacobi_eigh(S):
    """Diagonalize symmetric S; returns (eigenvalues, eigenvector columns)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] A = np.array(S, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t n = A.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] V = np.eye(n)
    if n < 2:
        return np.diag(A).copy(), V

    cdef double[:, :] a = A
    cdef double[:, :] v = V
    cdef double frob = 0.0, off, tiny
    cdef Py_ssize_t i, j, p, q, k, sweep
    cdef double apq, app, aqq, theta, t, c, s, akp, akq

    for i in range(n):
        for j in range(n):
            frob += a[i, j] * a[i, j]
    frob = sqrt(frob)
    tiny = np.finfo(np.float64).tiny
    cdef double tol = 1e-12 * (frob if frob > tiny else tiny)

    for sweep in range(MAX_SWEEPS):
        off = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    off += a[i, j] * a[i, j]
        if sqrt(off) < tol:
            return np.diag(A).copy(), V
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + sqrt(theta * theta + 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c

                app = a[p, p]
                aqq = a[q, q]
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    a[p, k] = a[k, p]
                    a[q, k] = a[k, q]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0

                for k in range(n):
                    akp = v[k, p]
                    akq = v[k, q]
                    v[k, p] = c * akp - s * akq
                    v[k, q] = s * akp + c * akq

    off = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                off += a[i, j] * a[i, j]
    if sqrt(off) < tol:
        return np.diag(A).copy(), V
    raise ValueError("Jacobi sweeps did not converge")
