import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nodeaug import autodiff as ad
from nodeaug.augment import get_augmented_graph, load_augmented, save_augmented
from nodeaug.errors import BadParams
from nodeaug.graph import Graph

from conftest import random_graph
from test_spectral import two_triangles


def test_two_triangles_one_node_each():
    aug = get_augmented_graph(two_triangles(), 2, rng=0)
    assert aug.n_aug == 8
    attached = sorted(aug.centers.tolist())
    assert attached[0] in (0, 1, 2) and attached[1] in (3, 4, 5)
    np.testing.assert_array_equal(aug.X_aug[6:], np.zeros((2, 1)))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(4, 25))
def test_block_structure(seed, n):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, 0.3, d=3, c=3)
    k = int(rng.integers(1, n + 1))
    aug = get_augmented_graph(g, k, rng)
    A = aug.adjacency()
    assert aug.n_aug == n + k
    assert np.array_equal(A, A.T)
    assert not A[n:, n:].any()
    np.testing.assert_array_equal(A[:n, :n], g.adjacency())
    np.testing.assert_array_equal(A[n:].sum(axis=1), np.ones(k))
    assert len(aug.new_edges) == k
    np.testing.assert_array_equal(aug.X_aug[:n], g.X)
    assert np.all(aug.X_aug[n:] == 0)
    assert np.all((aug.Y_new >= 0) & (aug.Y_new < g.c))


def test_bad_n_new():
    g = two_triangles()
    with pytest.raises(BadParams):
        get_augmented_graph(g, 0, rng=0)
    with pytest.raises(BadParams):
        get_augmented_graph(g, 7, rng=0)


def test_materialize_overlay_and_gradient():
    aug = get_augmented_graph(two_triangles(), 2, rng=0)
    assert np.all(aug.materialize().data[6:] == 0)
    ones = aug.with_theta(np.vstack([np.ones(1), np.zeros(1)]))
    np.testing.assert_array_equal(ones.materialize().data[6], [1.0])
    g = ad.backward(ad.sum(aug.materialize()))
    np.testing.assert_array_equal(g[aug.theta].data, np.ones((2, 1)))


def test_new_label_uniformity():
    rng = np.random.default_rng(1)
    g = random_graph(rng, 50, 0.1, c=4)
    draws = np.concatenate([get_augmented_graph(g, 50, rng).Y_new for _ in range(200)])
    assert len(draws) == 10_000
    counts = np.bincount(draws, minlength=4)
    sigma = np.sqrt(10_000 * 0.25 * 0.75)
    assert np.all(np.abs(counts - 2500) < 4 * sigma)


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    g = random_graph(rng, 12, 0.3)
    aug = get_augmented_graph(g, 3, rng)
    aug = aug.with_theta(rng.standard_normal((3, g.d)))
    save_augmented(aug, tmp_path / "a.txt", tmp_path / "t.txt")
    back = load_augmented(tmp_path / "a.txt", tmp_path / "t.txt", 3)
    assert back.base == g
    assert np.array_equal(back.centers, aug.centers)
    assert np.array_equal(back.Y_new, aug.Y_new)
    assert np.array_equal(back.theta.data, aug.theta.data)


def test_base_graph_not_modified():
    g = random_graph(np.random.default_rng(3), 10, 0.3)
    snapshot = Graph(g.X.copy(), g.Y.copy(), g.c, g.edges.copy())
    get_augmented_graph(g, 4, rng=0).materialize()
    assert g == snapshot
