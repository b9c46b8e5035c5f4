import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nodeaug.errors import BadParams, DegenerateGraph, IoFailure, MalformedFile, NotEnoughNegatives
from nodeaug.graph import (
    EdgeDataset, Graph, density, load_edge_dataset, load_graph, load_matrix, sample_negative_edges,
    save_edge_dataset, save_graph, save_matrix, split_graph, synth_sbm,
)

from conftest import complete_graph, path_graph, random_graph

TRIANGLE_FILE = "3 1 2\n1.0\n0.0\n1.0\n0 1 0\n3\n0 1\n1 2\n0 2\n"


def test_load_triangle(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text(TRIANGLE_FILE)
    g = load_graph(p)
    assert (g.n, g.d, g.c, g.m) == (3, 1, 2, 3)
    assert g.edges.tolist() == [[0, 1], [0, 2], [1, 2]]
    assert g.Y.tolist() == [0, 1, 0]
    A = g.adjacency()
    assert np.array_equal(A, A.T) and not A.diagonal().any()


@pytest.mark.parametrize("body", [
    "3 1 2\n1.0\n0.0\n1.0\n0 1 0\n1\n2 2\n",        # self-loop
    "3 1 2\n1.0\n0.0\n1.0\n0 1 2\n0\n",              # label >= c
    "3 1 2\n1.0\n0.0\n0 1 0\n0\n",                   # missing feature row
    "3 1\n1.0\n0.0\n1.0\n0 1 0\n0\n",                # bad header
    "3 1 2\n1.0\n0.0\n1.0\n0 1 0\n2\n0 1\n",         # edge count mismatch
    "3 1 2\n1.0\n0.0\n1.0\n0 1 0\n1\n0 3\n",         # node id out of range
    "3 1 2\n1.0\nabc\n1.0\n0 1 0\n0\n",              # not a number
])
def test_load_rejects_malformed(tmp_path, body):
    p = tmp_path / "bad.txt"
    p.write_text(body)
    with pytest.raises(MalformedFile):
        load_graph(p)


def test_load_missing_file(tmp_path):
    with pytest.raises(IoFailure):
        load_graph(tmp_path / "nope.txt")


def test_duplicate_and_reversed_edges_are_merged():
    g = Graph(np.zeros((3, 1)), [0, 0, 0], 1, [(1, 0), (0, 1), (2, 1)])
    assert g.edges.tolist() == [[0, 1], [1, 2]]


def test_save_k3_and_empty(tmp_path):
    p = tmp_path / "k3.txt"
    save_graph(complete_graph(3), p)
    lines = p.read_text().splitlines()
    assert lines[5] == "3"
    assert lines[6:] == ["0 1", "0 2", "1 2"]
    e = Graph(np.zeros((2, 1)), [0, 1], 2, np.zeros((0, 2), dtype=int))
    save_graph(e, p)
    assert p.read_text().splitlines()[-1] == "0"


def test_save_unwritable(tmp_path):
    with pytest.raises(IoFailure):
        save_graph(complete_graph(3), tmp_path / "missing-dir" / "g.txt")


def test_round_trip_random_graphs(tmp_path):
    rng = np.random.default_rng(0)
    for i in range(20):
        g = random_graph(rng, int(rng.integers(1, 15)), 0.3, d=int(rng.integers(1, 4)), c=3)
        p = tmp_path / f"g{i}.txt"
        save_graph(g, p)
        assert load_graph(p) == g


def test_matrix_sidecar_round_trip(tmp_path):
    a = np.random.default_rng(1).standard_normal((4, 3))
    save_matrix(a, tmp_path / "m.txt")
    assert np.array_equal(load_matrix(tmp_path / "m.txt"), a)


def test_edge_dataset_csv(tmp_path):
    ds = EdgeDataset.from_pairs([(0, 1), (2, 3)], [(0, 3)], 4)
    save_edge_dataset(ds, tmp_path / "d.csv")
    assert (tmp_path / "d.csv").read_text().splitlines()[0] == "u,v,y"
    back = load_edge_dataset(tmp_path / "d.csv", 4)
    assert back.rows == ds.rows


@pytest.mark.parametrize("u,v,y", [([0], [0], [1]), ([0], [1], [2]), ([0, 1], [1, 0], [1, 0])])
def test_edge_dataset_invariants(u, v, y):
    with pytest.raises(BadParams):
        EdgeDataset(u, v, y)


def test_density_examples():
    assert density(complete_graph(3)) == 0.5
    assert density(path_graph(4)) == 0.25
    with pytest.raises(DegenerateGraph):
        density(Graph(np.zeros((1, 1)), [0], 1, np.zeros((0, 2), dtype=int)))


def test_density_permutation_invariant():
    rng = np.random.default_rng(2)
    g = random_graph(rng, 12, 0.3)
    for _ in range(10):
        assert density(g.permuted(rng.permutation(g.n))) == density(g)


def test_negative_sampling_examples():
    p3 = path_graph(3)
    assert sample_negative_edges(p3, 1, rng=0).tolist() == [[0, 2]]
    with pytest.raises(NotEnoughNegatives):
        sample_negative_edges(complete_graph(3), 1, rng=0)
    g = random_graph(np.random.default_rng(3), 100, 0.05)
    neg = sample_negative_edges(g, 50, rng=1)
    assert len({tuple(r) for r in neg}) == 50
    assert not g.contains_pairs(neg).any()
    assert np.all(neg[:, 0] < neg[:, 1])


def test_negative_sampling_respects_exclude():
    p4 = path_graph(4)
    out = sample_negative_edges(p4, 2, exclude=np.array([[0, 2]]), rng=0)
    assert sorted(map(tuple, out.tolist())) == [(0, 3), (1, 3)]
    with pytest.raises(NotEnoughNegatives):
        sample_negative_edges(p4, 3, exclude=np.array([[0, 2]]), rng=0)


def test_negative_sampling_uniform_on_p4():
    p4 = path_graph(4)
    rng = np.random.default_rng(4)
    counts = {(0, 2): 0, (0, 3): 0, (1, 3): 0}
    reps = 10_000
    for _ in range(reps):
        counts[tuple(sample_negative_edges(p4, 1, rng=rng)[0])] += 1
    p = 1 / 3
    sigma = np.sqrt(reps * p * (1 - p))
    for c in counts.values():
        assert abs(c - reps * p) < 4 * sigma


def test_split_sizes_100_edges():
    rng = np.random.default_rng(5)
    # 100 edges on 60 nodes: a ring of 60 plus 40 chords
    ring = [(i, (i + 1) % 60) for i in range(60)]
    chords = [(i, (i + 7) % 60) for i in range(40)]
    g = Graph(rng.standard_normal((60, 2)), rng.integers(0, 2, 60), 2, ring + chords)
    assert g.m == 100
    s = split_graph(g, rng=rng)
    assert (len(s.train_pos), len(s.val_pos), len(s.test_pos)) == (70, 10, 20)
    assert (len(s.train_neg), len(s.val_neg), len(s.test_neg)) == (70, 10, 20)
    assert (len(s.train_nodes), len(s.val_nodes), len(s.test_nodes)) == (42, 6, 12)


def _keys(edges, n):
    e = np.sort(edges, axis=1)
    return set((e[:, 0] * n + e[:, 1]).tolist())


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(12, 40))
def test_split_partition_property(seed, n):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, 0.35)
    if g.m < 10 or g.m * 2 > n * (n - 1) // 2:
        return
    s = split_graph(g, rng=rng)
    parts = [s.train_pos, s.val_pos, s.test_pos, s.train_neg, s.val_neg, s.test_neg]
    keys = [_keys(p, n) for p in parts]
    for i in range(6):
        for j in range(i + 1, 6):
            assert not keys[i] & keys[j]
    assert keys[0] | keys[1] | keys[2] == _keys(g.edges, n)
    for neg in parts[3:]:
        assert not g.contains_pairs(neg).any()
    nodes = [set(s.train_nodes), set(s.val_nodes), set(s.test_nodes)]
    assert not (nodes[0] & nodes[1] or nodes[0] & nodes[2] or nodes[1] & nodes[2])
    assert set().union(*nodes) == set(range(n))


def test_split_deterministic_and_unlabeled_excluded():
    rng = np.random.default_rng(6)
    g = random_graph(rng, 30, 0.3)
    Y = g.Y.copy()
    Y[:5] = -1
    g = Graph(g.X, Y, g.c, g.edges)
    a = split_graph(g, rng=9)
    assert a == split_graph(g, rng=9)
    masked = set(a.train_nodes) | set(a.val_nodes) | set(a.test_nodes)
    assert masked.isdisjoint(range(5))


def test_split_needs_ten_edges():
    with pytest.raises(BadParams):
        split_graph(path_graph(5), rng=0)


def test_synth_sbm_examples():
    g = synth_sbm([100, 100], 0.05, 0.002, 16, 0.0, 0)
    assert g.n == 200 and g.c == 2 and g.d == 16
    assert np.array_equal(g.X[:, :2].argmax(axis=1), g.Y)
    g0 = synth_sbm([30, 30], 0.2, 0.0, 4, 0.5, 1)
    assert np.all(g0.Y[g0.edges[:, 0]] == g0.Y[g0.edges[:, 1]])
    with pytest.raises(BadParams):
        synth_sbm([10, 10], 0.1, 0.2, 4, 0.0, 0)
    with pytest.raises(BadParams):
        synth_sbm([10, 10, 10], 0.3, 0.1, 2, 0.0, 0)


def test_synth_sbm_binomial_counts():
    g = synth_sbm([100, 100], 0.05, 0.002, 16, 0.0, 7)
    trials = 100 * 99 // 2
    sigma = np.sqrt(trials * 0.05 * 0.95)
    for b in range(2):
        same = (g.Y[g.edges[:, 0]] == b) & (g.Y[g.edges[:, 1]] == b)
        assert abs(same.sum() - trials * 0.05) < 3 * sigma


def test_graph_is_immutable():
    g = complete_graph(3)
    with pytest.raises(ValueError):
        g.X[0, 0] = 5.0
    with pytest.raises(Exception):
        g.c = 4


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_symmetry_invariant(seed):
    g = random_graph(np.random.default_rng(seed), 10, 0.4)
    A = g.adjacency()
    assert np.array_equal(A, A.T)
    assert not A.diagonal().any()
