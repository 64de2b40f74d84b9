"""Shared test oracles: adjusted Rand index, brute-force k-means, planted
filter populations."""

import itertools
from math import comb

import numpy as np


def adjusted_rand_index(labels_a, labels_b):
    """ARI between two labelings of the same points (1.0 iff identical
    partitions up to relabeling)."""
    labels_a = np.asarray(labels_a)
    labels_b = np.asarray(labels_b)
    n = labels_a.size
    classes_a = np.unique(labels_a)
    classes_b = np.unique(labels_b)
    table = np.array(
        [[np.sum((labels_a == a) & (labels_b == b)) for b in classes_b] for a in classes_a]
    )
    sum_comb = sum(comb(int(x), 2) for x in table.ravel())
    sum_a = sum(comb(int(x), 2) for x in table.sum(axis=1))
    sum_b = sum(comb(int(x), 2) for x in table.sum(axis=0))
    total = comb(n, 2)
    expected = sum_a * sum_b / total
    max_index = (sum_a + sum_b) / 2
    if max_index == expected:
        return 1.0
    return (sum_comb - expected) / (max_index - expected)


def same_partition(labels_a, labels_b):
    """True iff the two labelings induce identical partitions."""
    return adjusted_rand_index(labels_a, labels_b) == 1.0


def brute_force_kmeans_objective(points, k):
    """Exact optimal k-means objective by enumerating all label assignments
    (clusters may come out empty, which only ever helps the optimum)."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    best = np.inf
    for assignment in itertools.product(range(k), repeat=n):
        labels = np.asarray(assignment)
        sse = 0.0
        for j in range(k):
            members = points[labels == j]
            if len(members):
                sse += float(np.sum((members - members.mean(axis=0)) ** 2))
        best = min(best, sse)
    return best


def planted_filter_tensor(rng, n_filters, filter_len=27, sigma=0.05):
    """Two-prototype filter population as a 2-D (filter_len, n) layer tensor.

    Returns (tensor shaped like an FC weight matrix, ground-truth labels).
    Both prototype families get at least 3 members.
    """
    a = rng.standard_normal(filter_len)
    a /= np.linalg.norm(a)
    b = rng.standard_normal(filter_len)
    b -= (b @ a) * a  # orthogonalize so the families are well separated
    b /= np.linalg.norm(b)
    n_a = int(rng.integers(3, n_filters - 2))
    truth = np.array([0] * n_a + [1] * (n_filters - n_a))
    columns = np.where(truth == 0, 0, 1)
    protos = np.stack([a, b], axis=1)
    tensor = protos[:, columns] + sigma * rng.standard_normal((filter_len, n_filters))
    return tensor, truth
