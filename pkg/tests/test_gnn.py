import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nodeaug.errors import BadParams, EmptyMask, ShapeMismatch
from nodeaug.gnn import (
    GnnParams, TrainConfig, accuracy, forward, init_params, normalize_adjacency, predict,
    train_node_classifier,
)
from nodeaug.graph import Graph, split_graph, synth_sbm

from conftest import complete_graph, random_graph


def const_params(kind, d, c, hidden, value):
    p = init_params(kind, d, c, hidden, rng=0)
    for t in p.tensors:
        t.data = np.full(t.shape, value)
    return p


def test_normalize_examples():
    iso = Graph(np.zeros((1, 1)), [0], 1, np.zeros((0, 2), dtype=int))
    np.testing.assert_array_equal(normalize_adjacency(iso), [[1.0]])
    pair = Graph(np.zeros((2, 1)), [0, 0], 1, [(0, 1)])
    np.testing.assert_allclose(normalize_adjacency(pair), np.full((2, 2), 0.5), atol=1e-15)
    np.testing.assert_allclose(normalize_adjacency(complete_graph(3)), np.full((3, 3), 1 / 3), atol=1e-15)


@pytest.mark.parametrize("kind", ["gcn", "sage"])
def test_forward_examples(kind):
    g = random_graph(np.random.default_rng(0), 4, 0.5, d=3, c=2)
    P = predict(const_params(kind, 3, 2, 16, 0.0), g)
    np.testing.assert_array_equal(P, np.full((4, 2), 0.5))
    P = predict(init_params(kind, 3, 2, 16, rng=1), g)
    assert P.shape == (4, 2)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)


def test_forward_isolated_node_hand_computed():
    x = np.array([[0.5, -1.0, 2.0]])
    g = Graph(x, [0], 2, np.zeros((0, 2), dtype=int))
    rng = np.random.default_rng(2)
    params = init_params("gcn", 3, 2, 4, rng)
    W0, W1 = params.weights["W0"].data, params.weights["W1"].data
    z = np.maximum(x @ W0, 0) @ W1
    ref = np.exp(z - z.max()) / np.exp(z - z.max()).sum()
    np.testing.assert_allclose(predict(params, g), ref, atol=1e-12)


def test_forward_shape_mismatch_and_unknown_kind():
    g = random_graph(np.random.default_rng(0), 4, 0.5, d=3)
    with pytest.raises(ShapeMismatch):
        forward(init_params("gcn", 3, 2, rng=0), g, X=np.zeros((5, 3)))
    with pytest.raises(BadParams):
        init_params("gat", 3, 2, rng=0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["gcn", "sage"]))
def test_posterior_rows_sum_to_one(seed, kind):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, int(rng.integers(1, 12)), 0.4, d=3, c=3)
    P = predict(init_params(kind, 3, 3, 8, rng), g)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-9)
    assert np.all((P >= 0) & (P <= 1))


@pytest.mark.parametrize("seed", range(5))
def test_gcn_permutation_equivariance(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 6, 0.5, d=3)
    params = init_params("gcn", 3, 2, 8, rng)
    perm = rng.permutation(6)
    P = predict(params, g)
    Pp = predict(params, g.permuted(perm))
    np.testing.assert_allclose(Pp[perm], P, atol=1e-12)


def test_eval_forward_deterministic():
    g = random_graph(np.random.default_rng(3), 8, 0.4, d=3)
    params = init_params("sage", 3, 2, 8, rng=1)
    assert np.array_equal(predict(params, g), predict(params, g))


def test_accuracy_examples():
    Y = np.array([0, 1, 1, 0])
    assert accuracy(np.eye(2)[Y], Y, np.arange(4)) == 1.0
    assert accuracy(np.full((4, 2), 0.5), np.zeros(4, dtype=int), np.arange(4)) == 1.0
    P = np.eye(2)[[0, 1, 1, 1]]
    assert accuracy(P, Y, np.arange(4)) == 0.75
    with pytest.raises(EmptyMask):
        accuracy(P, Y, [])


@pytest.fixture(scope="module")
def clean_sbm():
    g = synth_sbm([100, 100], 0.05, 0.002, 16, 0.0, 42)
    return g, split_graph(g, rng=42)


@pytest.mark.parametrize("kind", ["gcn", "sage"])
def test_training_reaches_high_accuracy(clean_sbm, kind):
    g, s = clean_sbm
    params, hist = train_node_classifier(g, s.train_nodes, s.val_nodes, TrainConfig(), rng=0, kind=kind)
    assert accuracy(predict(params, g), g.Y, s.test_nodes) >= 0.9
    assert sorted(hist.val_loss) == list(range(10, 201, 10))
    assert hist.best_epoch in hist.val_loss
    assert hist.val_loss[hist.best_epoch] == min(hist.val_loss.values())


def test_zero_epochs_returns_init(clean_sbm):
    g, s = clean_sbm
    params, hist = train_node_classifier(g, s.train_nodes, s.val_nodes, TrainConfig(epochs=0), rng=3)
    init = init_params("gcn", g.d, g.c, 16, np.random.default_rng(3))
    assert params.checksum() == init.checksum()
    assert hist.train_loss == []


def test_training_deterministic(clean_sbm):
    g, s = clean_sbm
    cfg = TrainConfig(epochs=30)
    a = train_node_classifier(g, s.train_nodes, s.val_nodes, cfg, rng=5)
    b = train_node_classifier(g, s.train_nodes, s.val_nodes, cfg, rng=5)
    assert a[1].train_loss == b[1].train_loss
    assert a[0].checksum() == b[0].checksum()


def test_training_loss_windows_mostly_nonincreasing(sbm, sbm_splits):
    _, hist = train_node_classifier(sbm, sbm_splits.train_nodes, sbm_splits.val_nodes, TrainConfig(), rng=0)
    L = np.array(hist.train_loss)
    windows = [L[i + 10] <= L[i] + 1e-3 for i in range(0, len(L) - 10, 10)]
    assert np.mean(windows) >= 0.9


def test_empty_train_mask(clean_sbm):
    g, s = clean_sbm
    with pytest.raises(EmptyMask):
        train_node_classifier(g, [], s.val_nodes, TrainConfig(epochs=1), rng=0)


def test_gnn_params_copy_is_independent():
    p = init_params("gcn", 3, 2, rng=0)
    q = p.copy()
    q.weights["W0"].data[0, 0] += 1.0
    assert p.checksum() != q.checksum()
    assert isinstance(q, GnnParams)
