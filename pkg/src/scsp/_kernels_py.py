"""Pure-numpy fallback for the compiled Jacobi kernel.

Same cyclic-by-row sweep schedule and rotation formulas as scsp._kernels; the
row/column updates are vectorized instead of elementwise, which keeps the
fallback usable (though one to two orders of magnitude slower than the
extension on 64x64+ matrices -- see benchmarks/bench_backends.py).
"""

import numpy as np


def jacobi_eigh(a, tol, max_sweeps):
    """Return (d, V) with d the unsorted eigenvalues and V the rotation product."""
    A = np.array(a, dtype=np.float64, order="C", copy=True)
    n = A.shape[0]
    V = np.eye(n, dtype=np.float64)
    if n < 2:
        return np.diagonal(A).copy(), V

    skip_tol = tol / n

    for _ in range(max_sweeps):
        off = _off_norm(A)
        if off <= tol:
            return np.diagonal(A).copy(), V
        for p in range(n - 1):
            row_q = np.abs(A[p, p + 1 :])
            for q in (p + 1 + np.nonzero(row_q > skip_tol)[0]):
                apq = A[p, q]
                if abs(apq) <= skip_tol:
                    continue  # a prior rotation in this sweep may have shrunk it
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + np.sqrt(1.0 + theta * theta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c

                ap, aq = A[p].copy(), A[q].copy()
                A[p] = c * ap - s * aq
                A[q] = s * ap + c * aq
                ap, aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                A[p, q] = 0.0
                A[q, p] = 0.0

                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq

    off = _off_norm(A)
    if off > tol:
        raise ValueError(
            f"jacobi_eigh did not converge in {max_sweeps} sweeps "
            f"(off-diagonal norm {off:.3e} > tol {tol:.3e})"
        )
    return np.diagonal(A).copy(), V


def _off_norm(A):
    # Sum off-diagonal squares directly; ||A||_F^2 - ||diag||^2 cancels
    # catastrophically once the off-diagonal mass is near eps * ||A||.
    off = A.copy()
    np.fill_diagonal(off, 0.0)
    return float(np.linalg.norm(off))
