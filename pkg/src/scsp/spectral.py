"""Filter clustering pipeline: filter tensor -> per-filter group labels.

Steps, per layer: reshape filters to a column matrix, drop zero filters,
pairwise cosine distances, RBF adjacency, degree matrix, symmetric normalized
Laplacian, eigendecomposition, k-means on the per-filter embedding rows.
"""

from dataclasses import dataclass, field

import numpy as np

from .linalg import eigh_symmetric, kmeans

# L2 norm at or below which a filter counts as zero and is dropped.
ZERO_FILTER_TOL = 1e-12


class EmptyLayerError(ValueError):
    """Every filter in the layer is zero; there is nothing to cluster."""


class LayerSkip(Exception):
    """Layer cannot be clustered this round (too few nonzero filters);
    the caller leaves it unpruned."""

    def __init__(self, layer_id, reason):
        super().__init__(f"layer {layer_id}: {reason}")
        self.layer_id = layer_id
        self.reason = reason


@dataclass(frozen=True)
class FilterMatrix:
    """A layer's filters as columns: (filter_len, n_filters).

    Column j is filter j flattened H-major, then W, then input channel
    (C-order collapse of an H x W x I x O tensor); FC layers contribute their
    (fan_in, O) weight matrix as-is. active_index_map[j] is the original
    filter index of column j, so dropped columns stay addressable.
    """

    layer_id: int
    weights: np.ndarray
    active_index_map: np.ndarray

    @property
    def filter_len(self):
        return self.weights.shape[0]

    @property
    def n_filters(self):
        return self.weights.shape[1]


@dataclass(frozen=True)
class SpectralConfig:
    """Per-layer clustering knobs.

    bandwidth is the RBF denominator; cosine distances live in [0, 2] so the
    unit default keeps the adjacency well spread. The embedding keeps all n
    eigenvectors unless reduce_dimension is set, in which case the embed_dim
    eigenvectors of smallest eigenvalue are used.
    """

    bandwidth: float = 1.0
    n_clusters: int = 10
    reduce_dimension: bool = False
    embed_dim: int = 0

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ValueError(f"bandwidth must be > 0, got {self.bandwidth}")
        if self.n_clusters < 2:
            raise ValueError(f"n_clusters must be >= 2, got {self.n_clusters}")
        if self.reduce_dimension and self.embed_dim < 1:
            raise ValueError("embed_dim must be >= 1 when reduce_dimension is set")


@dataclass(frozen=True)
class ClusterAssignment:
    """Group labels over a layer's retained filters.

    labels[j] is the group of retained column j; groups[g] holds the member
    filter indices of group g in the ORIGINAL filter numbering (sorted).
    The groups partition the retained filters and are all non-empty.
    """

    layer_id: int
    labels: np.ndarray
    groups: list = field(default_factory=list)

    @property
    def n_groups(self):
        return len(self.groups)


def default_n_clusters(n_filters, n_classes=10):
    """Cluster-count heuristic: the class count when the layer is wide enough,
    else a quarter of the filters (at least 2)."""
    if n_filters >= 2 * n_classes:
        return n_classes
    return max(2, n_filters // 4)


def reshape_filters(layer_weights, layer_id=0):
    """Reshape an H x W x I x O conv tensor (or fan_in x O FC matrix) to a
    (filter_len, n_filters) column matrix. Round-trips losslessly via
    .weights.reshape(original_shape)."""
    w = np.asarray(layer_weights, dtype=np.float64)
    if w.ndim not in (2, 4):
        raise ValueError(f"expected a 4-D conv tensor or 2-D FC matrix, got ndim={w.ndim}")
    if w.size == 0:
        raise ValueError(f"layer {layer_id}: empty weight tensor {w.shape}")
    n_filters = w.shape[-1]
    mat = np.ascontiguousarray(w.reshape(-1, n_filters))
    return FilterMatrix(
        layer_id=layer_id,
        weights=mat,
        active_index_map=np.arange(n_filters),
    )


def drop_zero_filters(m, tol=ZERO_FILTER_TOL):
    """Remove columns with L2 norm <= tol. Raises EmptyLayerError if nothing
    survives; the caller must skip clustering for that layer."""
    if tol < 0:
        raise ValueError(f"tol must be >= 0, got {tol}")
    norms = np.linalg.norm(m.weights, axis=0)
    keep = norms > tol
    if not keep.any():
        raise EmptyLayerError(f"layer {m.layer_id}: all {m.n_filters} filters are zero")
    if keep.all():
        return m
    return FilterMatrix(
        layer_id=m.layer_id,
        weights=np.ascontiguousarray(m.weights[:, keep]),
        active_index_map=m.active_index_map[keep],
    )


def cosine_distance_matrix(m):
    """Pairwise cosine distance S_jk = 1 - cos(m_j, m_k): symmetric, zero
    diagonal, entries in [0, 2]. Columns must be nonzero (drop zero filters
    first)."""
    norms = np.linalg.norm(m.weights, axis=0)
    if np.any(norms == 0.0):
        raise ValueError(f"layer {m.layer_id}: zero-norm column; drop_zero_filters not applied")
    unit = m.weights / norms
    s = 1.0 - unit.T @ unit
    s = 0.5 * (s + s.T)
    np.fill_diagonal(s, 0.0)
    np.clip(s, 0.0, 2.0, out=s)
    return s


def rbf_adjacency(s, bandwidth):
    """Radial-basis transform of a distance matrix: exp(-s^2 / bandwidth),
    diagonal exactly 1, entries in (0, 1]."""
    if bandwidth <= 0:
        raise ValueError(f"bandwidth must be > 0, got {bandwidth}")
    gamma = np.exp(-(s * s) / bandwidth)
    np.fill_diagonal(gamma, 1.0)
    return gamma


def degree_matrix(gamma):
    """Diagonal matrix of column sums of the adjacency."""
    return np.diag(gamma.sum(axis=0))


def normalized_laplacian(gamma, d):
    """Symmetric normalized Laplacian D^(-1/2) (D - Gamma) D^(-1/2).

    Positive semidefinite with eigenvalues in [0, 2]; the null space is
    spanned by D^(1/2) * ones.
    """
    deg = np.diagonal(d)
    if np.any(deg <= 0.0):
        raise ValueError("degree matrix has non-positive diagonal entries")
    inv_sqrt = 1.0 / np.sqrt(deg)
    pi = (d - gamma) * inv_sqrt[:, None] * inv_sqrt[None, :]
    return 0.5 * (pi + pi.T)


def spectral_embedding(pi, cfg):
    """Per-filter embedding rows from the Laplacian's eigenvectors.

    Full eigenvector matrix unless cfg.reduce_dimension, in which case the
    embed_dim eigenvectors of smallest eigenvalue are kept. Rows are
    L2-normalized before k-means (zero rows are left alone).
    """
    n = pi.shape[0]
    result = eigh_symmetric(pi)
    if cfg.reduce_dimension:
        if cfg.embed_dim > n:
            raise ValueError(f"embed_dim {cfg.embed_dim} exceeds filter count {n}")
        f = result.eigenvectors[:, : cfg.embed_dim].copy()
    else:
        f = result.eigenvectors.copy()
    return _row_normalize(f)


def _row_normalize(f):
    f = f.copy()
    row_norms = np.linalg.norm(f, axis=1)
    nz = row_norms > 0.0
    f[nz] /= row_norms[nz, None]
    return f


def cluster_filters(layer_weights, cfg, seed, layer_id=0):
    """Run the whole pipeline on one layer's weight tensor.

    Deterministic for a fixed seed. Raises LayerSkip when the layer has fewer
    nonzero filters than cfg.n_clusters (including the all-zero case).

    k-means runs on the n_clusters smallest-eigenvalue coordinates of the
    embedding: the complete eigenvector matrix is orthogonal, so its rows are
    exactly orthonormal (all pairwise distances sqrt(2)) and clustering them
    directly carries no information.
    """
    m = reshape_filters(layer_weights, layer_id)
    try:
        m = drop_zero_filters(m)
    except EmptyLayerError:
        raise LayerSkip(layer_id, "all filters are zero") from None
    if m.n_filters < cfg.n_clusters:
        raise LayerSkip(
            layer_id,
            f"{m.n_filters} nonzero filters < {cfg.n_clusters} clusters",
        )

    s = cosine_distance_matrix(m)
    gamma = rbf_adjacency(s, cfg.bandwidth)
    d = degree_matrix(gamma)
    pi = normalized_laplacian(gamma, d)
    f = spectral_embedding(pi, cfg)
    if not cfg.reduce_dimension:
        f = _row_normalize(f[:, : cfg.n_clusters])
    km = kmeans(f, cfg.n_clusters, seed)

    groups = [
        np.sort(m.active_index_map[km.labels == g]) for g in range(cfg.n_clusters)
    ]
    return ClusterAssignment(layer_id=layer_id, labels=km.labels, groups=groups)
