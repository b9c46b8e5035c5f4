import numpy as np
import pytest

from nodeaug.graph import Graph, split_graph, synth_sbm

# The desk-scale fixture shared by end-to-end tests: two 100-node blocks.
FIXTURE_SYNTH = {"block_sizes": [100, 100], "p_in": 0.05, "p_out": 0.002, "d": 16, "feature_noise": 1.0}
FIXTURE_SEED = 42


def random_graph(rng, n, p, d=3, c=2, labeled=True):
    A = np.triu(rng.random((n, n)) < p, k=1)
    edges = np.argwhere(A)
    X = rng.standard_normal((n, d))
    Y = rng.integers(0, c, n) if labeled else np.full(n, -1)
    return Graph(X, Y, c, edges)


def path_graph(n, d=1, c=2):
    return Graph(np.ones((n, d)), np.zeros(n, dtype=int), c, [(i, i + 1) for i in range(n - 1)])


def complete_graph(n, d=1, c=2):
    return Graph(np.ones((n, d)), np.zeros(n, dtype=int), c,
                 [(i, j) for i in range(n) for j in range(i + 1, n)])


@pytest.fixture(scope="session")
def sbm():
    s = FIXTURE_SYNTH
    return synth_sbm(s["block_sizes"], s["p_in"], s["p_out"], s["d"], s["feature_noise"],
                     np.random.default_rng(FIXTURE_SEED))


@pytest.fixture(scope="session")
def sbm_splits(sbm):
    return split_graph(sbm, rng=np.random.default_rng(FIXTURE_SEED))
