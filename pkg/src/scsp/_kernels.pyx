# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernel: cyclic Jacobi eigendecomposition for dense symmetric matrices.

Mirrors scsp._kernels_py.jacobi_eigh exactly; scsp.backend picks whichever is
importable. Cyclic-by-row sweeps with a per-element rotation threshold, accumulating
the eigenvector matrix V so that A = V @ diag(d) @ V.T on return.
"""

from libc.math cimport fabs, sqrt

import numpy as np


def jacobi_eigh(a, double tol, int max_sweeps):
    """Return (d, V) with d the unsorted eigenvalues and V the rotation product.

    a must be a symmetric float64 square matrix; it is copied, not modified.
    tol is the absolute off-diagonal Frobenius norm at which sweeping stops.
    Raises ValueError if the off-diagonal mass still exceeds tol after
    max_sweeps sweeps (never observed for max_sweeps ~ 30 at float64).
    """
    A_arr = np.array(a, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t n = A_arr.shape[0]
    V_arr = np.eye(n, dtype=np.float64)
    cdef double[:, ::1] A = A_arr
    cdef double[:, ::1] V = V_arr

    cdef Py_ssize_t i, p, q, sweep
    cdef double off, apq, app, aqq, theta, t, c, s, aip, aiq, vip, viq, skip_tol

    if n < 2:
        return np.diagonal(A_arr).copy(), V_arr

    # Rotations on elements below skip_tol cannot push the off-norm above tol.
    skip_tol = tol / (<double> n)

    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += A[p, q] * A[p, q]
        off = sqrt(2.0 * off)
        if off <= tol:
            return np.diagonal(A_arr).copy(), V_arr

        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if fabs(apq) <= skip_tol:
                    continue
                app = A[p, p]
                aqq = A[q, q]
                theta = (aqq - app) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + sqrt(1.0 + theta * theta))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c

                A[p, p] = app - t * apq
                A[q, q] = aqq + t * apq
                A[p, q] = 0.0
                A[q, p] = 0.0
                for i in range(n):
                    if i == p or i == q:
                        continue
                    aip = A[i, p]
                    aiq = A[i, q]
                    A[i, p] = c * aip - s * aiq
                    A[p, i] = A[i, p]
                    A[i, q] = s * aip + c * aiq
                    A[q, i] = A[i, q]
                for i in range(n):
                    vip = V[i, p]
                    viq = V[i, q]
                    V[i, p] = c * vip - s * viq
                    V[i, q] = s * vip + c * viq

    off = 0.0
    for p in range(n - 1):
        for q in range(p + 1, n):
            off += A[p, q] * A[p, q]
    off = sqrt(2.0 * off)
    if off > tol:
        raise ValueError(
            f"jacobi_eigh did not converge in {max_sweeps} sweeps "
            f"(off-diagonal norm {off:.3e} > tol {tol:.3e})"
        )
    return np.diagonal(A_arr).copy(), V_arr
