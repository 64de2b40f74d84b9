import math

import numpy as np
import pytest

from helpers import adjusted_rand_index, planted_filter_tensor
from scsp.linalg import eigh_symmetric, kmeans
from scsp.spectral import (
    EmptyLayerError,
    FilterMatrix,
    LayerSkip,
    SpectralConfig,
    cluster_filters,
    cosine_distance_matrix,
    default_n_clusters,
    degree_matrix,
    drop_zero_filters,
    normalized_laplacian,
    rbf_adjacency,
    reshape_filters,
    spectral_embedding,
)


def fm(weights, layer_id=0):
    weights = np.asarray(weights, dtype=np.float64)
    return FilterMatrix(layer_id, weights, np.arange(weights.shape[1]))


class TestReshapeFilters:
    def test_conv_tensor_shape(self):
        t = np.arange(2 * 2 * 1 * 3, dtype=float).reshape(2, 2, 1, 3)
        m = reshape_filters(t)
        assert m.weights.shape == (4, 3)

    def test_single_weight(self):
        m = reshape_filters(np.full((1, 1, 1, 1), 7.0))
        assert m.weights.shape == (1, 1)
        assert m.weights[0, 0] == 7.0

    def test_round_trip(self):
        rng = np.random.default_rng(0)
        t = rng.standard_normal((3, 3, 4, 6))
        m = reshape_filters(t)
        assert np.array_equal(m.weights.reshape(t.shape), t)

    def test_column_is_flattened_filter(self):
        rng = np.random.default_rng(1)
        t = rng.standard_normal((3, 3, 2, 5))
        m = reshape_filters(t)
        for j in range(5):
            assert np.array_equal(m.weights[:, j], t[:, :, :, j].reshape(-1))

    def test_fc_matrix_passthrough(self):
        w = np.arange(12, dtype=float).reshape(4, 3)
        m = reshape_filters(w, layer_id=2)
        assert np.array_equal(m.weights, w)
        assert m.layer_id == 2

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            reshape_filters(np.empty((0, 3)))


class TestDropZeroFilters:
    def test_drops_and_maps(self):
        m = fm(np.array([[5.0, 0.0, 2.0]]))
        out = drop_zero_filters(m, tol=1e-12)
        assert out.n_filters == 2
        assert np.array_equal(out.active_index_map, [0, 2])
        assert np.array_equal(out.weights, [[5.0, 2.0]])

    def test_identity_when_no_zeros(self):
        m = fm(np.array([[1.0, 2.0], [3.0, 4.0]]))
        out = drop_zero_filters(m)
        assert np.array_equal(out.weights, m.weights)
        assert np.array_equal(out.active_index_map, [0, 1])

    def test_all_zero_raises(self):
        with pytest.raises(EmptyLayerError):
            drop_zero_filters(fm(np.zeros((3, 4))))


class TestCosineDistance:
    def test_identical_filters(self):
        m = fm(np.array([[1.0, 1.0], [2.0, 2.0]]))
        s = cosine_distance_matrix(m)
        assert s[0, 1] == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal_filters(self):
        m = fm(np.array([[1.0, 0.0], [0.0, 1.0]]))
        s = cosine_distance_matrix(m)
        assert s[0, 1] == pytest.approx(1.0, abs=1e-12)

    def test_antiparallel_filters(self):
        m = fm(np.array([[1.0, -1.0], [0.0, 0.0]]))
        s = cosine_distance_matrix(m)
        assert s[0, 1] == pytest.approx(2.0, abs=1e-12)

    def test_symmetric_zero_diagonal_bounded(self):
        rng = np.random.default_rng(0)
        m = fm(rng.standard_normal((9, 14)))
        s = cosine_distance_matrix(m)
        assert np.array_equal(s, s.T)
        assert np.all(np.diagonal(s) == 0.0)
        assert s.min() >= 0.0 and s.max() <= 2.0

    def test_scaling_invariance(self):
        rng = np.random.default_rng(1)
        w = rng.standard_normal((6, 8))
        scales = rng.uniform(0.1, 9.0, size=8)
        s1 = cosine_distance_matrix(fm(w))
        s2 = cosine_distance_matrix(fm(w * scales))
        assert np.max(np.abs(s1 - s2)) <= 1e-12

    def test_zero_column_rejected(self):
        with pytest.raises(ValueError):
            cosine_distance_matrix(fm(np.array([[1.0, 0.0]])))


class TestRbfAdjacency:
    def test_zero_distance(self):
        s = np.zeros((2, 2))
        g = rbf_adjacency(s, bandwidth=3.7)
        assert np.all(g == 1.0)

    def test_scalar_values_against_exp(self):
        s = np.array([[0.0, 1.0], [1.0, 0.0]])
        g = rbf_adjacency(s, bandwidth=1.0)
        assert g[0, 1] == pytest.approx(math.exp(-1.0), rel=1e-12)
        s2 = np.array([[0.0, 2.0], [2.0, 0.0]])
        g2 = rbf_adjacency(s2, bandwidth=2.0)
        assert g2[0, 1] == pytest.approx(math.exp(-2.0), rel=1e-12)

    def test_range_and_diagonal(self):
        rng = np.random.default_rng(0)
        m = fm(rng.standard_normal((5, 11)))
        g = rbf_adjacency(cosine_distance_matrix(m), bandwidth=1.0)
        assert np.all(np.diagonal(g) == 1.0)
        assert g.min() > 0.0 and g.max() <= 1.0
        assert np.array_equal(g, g.T)

    def test_bad_bandwidth(self):
        with pytest.raises(ValueError):
            rbf_adjacency(np.zeros((2, 2)), bandwidth=0.0)


class TestDegreeMatrix:
    def test_hand_row_sums(self):
        g = np.array([[1.0, 0.5], [0.5, 1.0]])
        d = degree_matrix(g)
        assert np.array_equal(d, np.diag([1.5, 1.5]))

    def test_identity(self):
        assert np.array_equal(degree_matrix(np.eye(3)), np.eye(3))

    def test_all_ones(self):
        d = degree_matrix(np.ones((2, 2)))
        assert np.array_equal(d, np.diag([2.0, 2.0]))

    def test_off_diagonal_exactly_zero(self):
        rng = np.random.default_rng(0)
        g = rng.uniform(0.1, 1.0, (6, 6))
        g = 0.5 * (g + g.T)
        d = degree_matrix(g)
        assert np.count_nonzero(d - np.diag(np.diagonal(d))) == 0


class TestNormalizedLaplacian:
    def test_two_node_hand_case(self):
        g = np.ones((2, 2))
        pi = normalized_laplacian(g, degree_matrix(g))
        assert np.allclose(pi, [[0.5, -0.5], [-0.5, 0.5]], atol=1e-15)
        w = eigh_symmetric(pi).eigenvalues
        assert np.allclose(w, [0.0, 1.0], atol=1e-12)

    def test_identity_adjacency_gives_zero(self):
        g = np.eye(3)
        pi = normalized_laplacian(g, degree_matrix(g))
        assert np.allclose(pi, 0.0, atol=1e-15)

    def test_null_vector(self):
        rng = np.random.default_rng(2)
        m = fm(rng.standard_normal((7, 10)))
        g = rbf_adjacency(cosine_distance_matrix(m), 1.0)
        d = degree_matrix(g)
        pi = normalized_laplacian(g, d)
        null = np.sqrt(np.diagonal(d))
        assert np.max(np.abs(pi @ null)) <= 1e-10
        w = eigh_symmetric(pi).eigenvalues
        assert w[0] >= -1e-8
        assert abs(w[0]) <= 1e-8
        assert w[-1] <= 2.0 + 1e-8

    def test_symmetry(self):
        rng = np.random.default_rng(3)
        m = fm(rng.standard_normal((4, 9)))
        s = cosine_distance_matrix(m)
        g = rbf_adjacency(s, 0.7)
        pi = normalized_laplacian(g, degree_matrix(g))
        assert np.max(np.abs(pi - pi.T)) <= 1e-12


class TestSpectralEmbedding:
    def test_full_embedding_shape(self):
        rng = np.random.default_rng(0)
        m = fm(rng.standard_normal((5, 4)))
        g = rbf_adjacency(cosine_distance_matrix(m), 1.0)
        pi = normalized_laplacian(g, degree_matrix(g))
        f = spectral_embedding(pi, SpectralConfig(n_clusters=2))
        assert f.shape == (4, 4)

    def test_zero_laplacian_reduced(self):
        f = spectral_embedding(np.zeros((3, 3)), SpectralConfig(n_clusters=2, reduce_dimension=True, embed_dim=2))
        assert f.shape == (3, 2)
        # rows are unit where nonzero
        norms = np.linalg.norm(f, axis=1)
        assert np.all((norms == 0.0) | (np.abs(norms - 1.0) <= 1e-12))

    def test_embed_dim_too_large(self):
        with pytest.raises(ValueError):
            spectral_embedding(np.zeros((3, 3)), SpectralConfig(n_clusters=2, reduce_dimension=True, embed_dim=4))

    def test_disconnected_components_separate(self):
        # two 2-filter components: block-diagonal adjacency
        g = np.array(
            [
                [1.0, 0.95, 0.01, 0.01],
                [0.95, 1.0, 0.01, 0.01],
                [0.01, 0.01, 1.0, 0.92],
                [0.01, 0.01, 0.92, 1.0],
            ]
        )
        pi = normalized_laplacian(g, degree_matrix(g))
        cfg = SpectralConfig(n_clusters=2, reduce_dimension=True, embed_dim=2)
        f = spectral_embedding(pi, cfg)
        # oracle: within-block embedding distance < between-block distance
        within = max(np.linalg.norm(f[0] - f[1]), np.linalg.norm(f[2] - f[3]))
        between = min(
            np.linalg.norm(f[a] - f[b]) for a in (0, 1) for b in (2, 3)
        )
        assert within < between
        km = kmeans(f, 2, seed=0)
        assert km.labels[0] == km.labels[1]
        assert km.labels[2] == km.labels[3]
        assert km.labels[0] != km.labels[2]


class TestClusterFilters:
    def test_planted_two_prototypes_recovered(self):
        rng = np.random.default_rng(0)
        tensor, truth = planted_filter_tensor(rng, n_filters=16)
        cfg = SpectralConfig(n_clusters=2)
        out = cluster_filters(tensor, cfg, seed=0)
        assert adjusted_rand_index(out.labels, truth) == 1.0
        assert sum(len(g) for g in out.groups) == 16
        assert all(len(g) > 0 for g in out.groups)

    def test_identical_filters_graceful(self):
        w = np.tile(np.array([[1.0], [2.0]]), (1, 6)) * np.linspace(1, 3, 6)
        out = cluster_filters(w, SpectralConfig(n_clusters=2), seed=0)
        assert out.n_groups == 2
        assert all(len(g) > 0 for g in out.groups)

    def test_too_few_nonzero_filters_skips(self):
        w = np.zeros((4, 5))
        w[:, :3] = np.random.default_rng(0).standard_normal((4, 3))
        with pytest.raises(LayerSkip):
            cluster_filters(w, SpectralConfig(n_clusters=10), seed=0)

    def test_all_zero_skips(self):
        with pytest.raises(LayerSkip):
            cluster_filters(np.zeros((3, 4)), SpectralConfig(n_clusters=2), seed=0)

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        tensor, _ = planted_filter_tensor(rng, n_filters=24)
        a = cluster_filters(tensor, SpectralConfig(n_clusters=2), seed=9)
        b = cluster_filters(tensor, SpectralConfig(n_clusters=2), seed=9)
        assert np.array_equal(a.labels, b.labels)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(3)
        tensor, truth = planted_filter_tensor(rng, n_filters=20)
        cfg = SpectralConfig(n_clusters=2)
        base = cluster_filters(tensor, cfg, seed=1)
        perm = rng.permutation(20)
        permuted = cluster_filters(tensor[:, perm], cfg, seed=1)
        # map the permuted labels back to original filter order and compare partitions
        mapped = np.empty(20, dtype=int)
        mapped[perm] = permuted.labels
        assert adjusted_rand_index(base.labels, mapped) == 1.0

    def test_groups_in_original_indexing_with_dropped_filters(self):
        rng = np.random.default_rng(4)
        tensor, _ = planted_filter_tensor(rng, n_filters=12)
        tensor = tensor.copy()
        tensor[:, 5] = 0.0  # dropped filter must not appear in any group
        out = cluster_filters(tensor, SpectralConfig(n_clusters=2), seed=0)
        members = np.concatenate(out.groups)
        assert 5 not in members
        assert sorted(members.tolist()) == [i for i in range(12) if i != 5]


def test_default_n_clusters_heuristic():
    assert default_n_clusters(32) == 10
    assert default_n_clusters(20) == 10
    assert default_n_clusters(19) == 4
    assert default_n_clusters(9) == 2
    assert default_n_clusters(12) == 3


def test_spectral_config_validation():
    with pytest.raises(ValueError):
        SpectralConfig(bandwidth=0.0)
    with pytest.raises(ValueError):
        SpectralConfig(n_clusters=1)
    with pytest.raises(ValueError):
        SpectralConfig(reduce_dimension=True, embed_dim=0)
