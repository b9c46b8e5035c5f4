import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nodeaug.errors import BadParams, ConvergenceFailure, EmptyCluster
from nodeaug.graph import Graph, synth_sbm
from nodeaug.spectral import (
    cluster_center, kary_tree_max_edges, kmeans, recommended_cluster_count, smallest_eigenpairs,
    spectral_cluster, unnormalized_laplacian,
)

from conftest import complete_graph, path_graph
from oracles import adjusted_rand_index, component_count, kary_tree_edges_bfs


def two_triangles():
    return Graph(np.zeros((6, 1)), np.zeros(6, dtype=int), 1, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])


def test_laplacian_examples():
    np.testing.assert_array_equal(unnormalized_laplacian(complete_graph(3)),
                                  [[2, -1, -1], [-1, 2, -1], [-1, -1, 2]])
    iso = Graph(np.zeros((1, 1)), [0], 1, np.zeros((0, 2), dtype=int))
    np.testing.assert_array_equal(unnormalized_laplacian(iso), [[0.0]])
    rng = np.random.default_rng(0)
    g = Graph(np.zeros((8, 1)), np.zeros(8, dtype=int), 1, np.argwhere(np.triu(rng.random((8, 8)) < 0.4, 1)))
    np.testing.assert_array_equal(unnormalized_laplacian(g) @ np.ones(8), np.zeros(8))


def test_eigen_examples():
    w, _ = smallest_eigenpairs(unnormalized_laplacian(complete_graph(3)), 3)
    np.testing.assert_allclose(w, [0, 3, 3], atol=1e-8)
    two = Graph(np.zeros((4, 1)), np.zeros(4, dtype=int), 1, [(0, 1), (2, 3)])
    w, _ = smallest_eigenpairs(unnormalized_laplacian(two), 4)
    assert np.sum(np.abs(w) < 1e-10) == 2
    w, _ = smallest_eigenpairs(unnormalized_laplacian(path_graph(3)), 3)
    np.testing.assert_allclose(w, [0, 1, 3], atol=1e-8)


def test_eigen_bad_inputs():
    with pytest.raises(BadParams):
        smallest_eigenpairs(np.array([[0.0, 1.0], [0.0, 0.0]]), 1)
    with pytest.raises(BadParams):
        smallest_eigenpairs(np.eye(3), 4)


def test_eigen_contract_failure_surfaces(monkeypatch):
    from nodeaug import kernels, spectral

    monkeypatch.setattr(kernels, "symmetric_eigh", lambda L: (np.zeros(len(L)), np.eye(len(L))))
    with pytest.raises(ConvergenceFailure):
        spectral.smallest_eigenpairs(unnormalized_laplacian(complete_graph(3)), 2)


@pytest.mark.parametrize("seed", range(10))
def test_zero_multiplicity_equals_components(seed):
    rng = np.random.default_rng(seed)
    parts = int(rng.integers(1, 5))
    edges, offset = [], 0
    for _ in range(parts):
        size = int(rng.integers(2, 7))
        # a random spanning path keeps each part connected, plus extra chords
        order = rng.permutation(size) + offset
        edges += [(int(a), int(b)) for a, b in zip(order[:-1], order[1:])]
        for a in range(size):
            for b in range(a + 1, size):
                if rng.random() < 0.3:
                    edges.append((a + offset, b + offset))
        offset += size
    g = Graph(np.zeros((offset, 1)), np.zeros(offset, dtype=int), 1, edges)
    w, V = smallest_eigenpairs(unnormalized_laplacian(g), offset)
    assert int(np.sum(np.abs(w) < 1e-8)) == component_count(offset, g.edges.tolist()) == parts
    np.testing.assert_allclose(V.T @ V, np.eye(offset), atol=1e-8)


def test_kmeans_examples():
    lab = kmeans(np.array([0.0, 0.1, 10.0, 10.1]), 2, rng=0)
    assert lab[0] == lab[1] != lab[2] == lab[3]
    pts = np.random.default_rng(1).standard_normal((6, 2))
    assert sorted(kmeans(pts, 6, rng=0)) == list(range(6))
    rng = np.random.default_rng(2)
    centers = np.array([[0, 0], [20, 0], [0, 20]])
    truth = np.repeat(np.arange(3), 30)
    blobs = centers[truth] + rng.standard_normal((90, 2))
    assert adjusted_rand_index(kmeans(blobs, 3, rng=3), truth) == 1.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 20))
def test_kmeans_never_leaves_empty_cluster(seed, n):
    rng = np.random.default_rng(seed)
    pts = np.round(rng.standard_normal((n, 2)), 0)  # many duplicate points
    k = int(rng.integers(1, n + 1))
    lab = kmeans(pts, k, rng=rng)
    assert set(lab.tolist()) == set(range(k))


def test_spectral_cluster_examples():
    res = spectral_cluster(two_triangles(), 2, rng=0)
    assert set(res.assignment[:3]) != set(res.assignment[3:])
    assert len(set(res.assignment[:3])) == len(set(res.assignment[3:])) == 1
    assert all(res.assignment[c] == i for i, c in enumerate(res.centers))
    one = spectral_cluster(two_triangles(), 1, rng=0)
    assert set(one.assignment) == {0}
    g = synth_sbm([40, 40], 0.3, 0.01, 4, 0.0, 5)
    res = spectral_cluster(g, 2, rng=0)
    assert adjusted_rand_index(res.assignment, g.Y) >= 0.95


def test_spectral_cluster_deterministic():
    g = synth_sbm([20, 20, 20], 0.3, 0.02, 4, 0.0, 6)
    a, b = spectral_cluster(g, 5, rng=11), spectral_cluster(g, 5, rng=11)
    assert np.array_equal(a.assignment, b.assignment) and np.array_equal(a.centers, b.centers)
    assert np.array_equal(a.embedding, b.embedding)


def test_cluster_center_examples():
    assert cluster_center(np.array([[0.3]]), [7]) == 7
    assert cluster_center(np.array([[0.0], [1.0], [2.0]]), [4, 5, 6]) == 5
    assert cluster_center(np.array([[0.0], [1.0]]), [9, 3]) == 3
    with pytest.raises(EmptyCluster):
        cluster_center(np.zeros((0, 1)), [])


def test_kary_examples_and_bfs():
    assert kary_tree_max_edges(3, 2) == 9
    for K in range(2, 7):
        assert kary_tree_max_edges(K, 1) == K
    assert kary_tree_max_edges(2, 5) == 10
    for K in range(2, 6):
        for L in range(1, 5):
            assert kary_tree_max_edges(K, L) == kary_tree_edges_bfs(K, L)
    with pytest.raises(BadParams):
        kary_tree_max_edges(1, 2)


def test_recommended_cluster_count():
    assert recommended_cluster_count(10, 0.00144, 0.000823) == (17, 20)
    assert recommended_cluster_count(10, 0.00144, 0.000228) == (63, 60)
    assert recommended_cluster_count(10, 0.00144, 0.00144) == (10, 10)
    assert recommended_cluster_count(10, 0.00144, 0.01) == (1, 10)
    for N in (3, 10, 57):
        assert recommended_cluster_count(N, 0.003, 0.003)[0] == N
    with pytest.raises(BadParams):
        recommended_cluster_count(10, 0.0, 0.1)
