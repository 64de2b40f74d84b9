"""Dense symmetric eigendecomposition and k-means.

These are the two numeric kernels the spectral pipeline sits on. Matrices are
plain C-contiguous float64 ndarrays throughout the package.
"""

from dataclasses import dataclass

import numpy as np

from . import backend

# Sweeping stops when the off-diagonal Frobenius norm drops below
# JACOBI_TOL * max(1, ||A||_F); the relative scaling keeps the threshold
# attainable in float64 for large-norm inputs.
JACOBI_TOL = 1e-10
JACOBI_MAX_SWEEPS = 60

SYMMETRY_DEFECT_TOL = 1e-9

DEFAULT_KMEANS_MAX_ITERS = 100


@dataclass(frozen=True)
class EigenResult:
    """Full spectrum of a symmetric matrix, eigenvalues ascending.

    Column j of `eigenvectors` is the unit-norm eigenvector paired with
    eigenvalues[j]; sign convention: the largest-magnitude component of each
    column is positive.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass(frozen=True)
class KMeansResult:
    labels: np.ndarray  # (n,) ints in [0, k)
    centers: np.ndarray  # (k, dim)
    objective: float  # sum of squared distances to assigned centers


def _as_square_matrix(a):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] == 0:
        raise ValueError("matrix is empty")
    if not np.isfinite(a).all():
        raise ValueError("matrix contains non-finite entries")
    return a


def eigh_symmetric(a):
    """Eigendecomposition of a symmetric matrix via cyclic Jacobi rotations.

    Returns the full spectrum (no truncation). Raises ValueError on non-square
    input, non-finite entries, or symmetry defect beyond 1e-9.
    """
    a = _as_square_matrix(a)
    defect = float(np.max(np.abs(a - a.T)))
    if defect > SYMMETRY_DEFECT_TOL:
        raise ValueError(f"matrix is not symmetric (max|a_ij - a_ji| = {defect:.3e})")
    sym = 0.5 * (a + a.T)

    tol = JACOBI_TOL * max(1.0, float(np.linalg.norm(sym)))
    d, v = backend.jacobi_eigh(sym, tol, JACOBI_MAX_SWEEPS)

    order = np.argsort(d, kind="stable")
    d = d[order]
    v = np.ascontiguousarray(v[:, order])

    # Deterministic sign: flip columns whose largest-|.| entry is negative.
    anchor = np.argmax(np.abs(v), axis=0)
    flip = v[anchor, np.arange(v.shape[1])] < 0.0
    v[:, flip] *= -1.0

    return EigenResult(eigenvalues=d, eigenvectors=v)


def kmeans(points, k, seed, max_iters=DEFAULT_KMEANS_MAX_ITERS):
    """Lloyd's algorithm with k-means++ seeding, deterministic per seed.

    Ties in assignment go to the lower center index; an empty cluster is
    repaired by stealing the point currently farthest from its own center.
    Stops at a label fixed point or after max_iters center updates.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError(f"points must be 2-D (n, dim), got shape {points.shape}")
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")

    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(points, k, rng)
    labels = _assign(points, centers)

    for _ in range(max_iters):
        centers = _update_centers(points, labels, k)
        new_labels = _assign(points, centers)
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels

    objective = float(np.sum((points - centers[labels]) ** 2))
    return KMeansResult(labels=labels, centers=centers, objective=objective)


def _kmeans_pp_init(points, k, rng):
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]), dtype=np.float64)
    centers[0] = points[rng.integers(n)]
    if k == 1:
        return centers
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            idx = int(rng.integers(n))  # all points coincide with chosen centers
        else:
            cum = np.cumsum(d2)
            idx = int(np.searchsorted(cum, rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers[j] = points[idx]
        d2 = np.minimum(d2, np.sum((points - centers[j]) ** 2, axis=1))
    return centers


def _dist2(points, centers):
    # |x|^2 - 2 x.c + |c|^2, clipped against rounding below zero
    d2 = (
        np.sum(points**2, axis=1)[:, None]
        - 2.0 * (points @ centers.T)
        + np.sum(centers**2, axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def _assign(points, centers):
    d2 = _dist2(points, centers)
    labels = np.argmin(d2, axis=1)  # argmin takes the first minimum: lower index wins ties
    k = centers.shape[0]
    for empty in np.nonzero(np.bincount(labels, minlength=k) == 0)[0]:
        # steal the point farthest from its own center, but never a point
        # whose departure would empty another cluster
        own = d2[np.arange(len(labels)), labels].copy()
        counts = np.bincount(labels, minlength=k)
        own[counts[labels] <= 1] = -np.inf
        donor = int(np.argmax(own))
        labels[donor] = empty
    return labels


def _update_centers(points, labels, k):
    centers = np.empty((k, points.shape[1]), dtype=np.float64)
    for j in range(k):
        centers[j] = points[labels == j].mean(axis=0)
    return centers
