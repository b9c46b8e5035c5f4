"""Graph container, text I/O, density, splits, negative sampling and SBM synthesis.

Graphs are undirected, unweighted and self-loop free.  The adjacency is
kept as a sorted ``(m, 2)`` array of pairs ``u < v``; dense and sparse
views are derived on demand and cached.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import (
    BadParams,
    DegenerateGraph,
    EmptyDataset,
    IoFailure,
    MalformedFile,
    NotEnoughNegatives,
)

# enumerate non-edges explicitly below this many candidate pairs, rejection-sample above
_ENUMERATE_LIMIT = 4_000_000


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def canonical_edges(edges, n: int) -> np.ndarray:
    """Return deduplicated, sorted ``(m, 2)`` int64 pairs with ``u < v``.

    Raises ``MalformedFile`` on self-loops or out-of-range ids.
    """
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if e.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if np.any(e[:, 0] == e[:, 1]):
        bad = e[e[:, 0] == e[:, 1]][0]
        raise MalformedFile(f"self-loop edge ({bad[0]}, {bad[1]})")
    if e.min() < 0 or e.max() >= n:
        raise MalformedFile(f"edge endpoint outside [0, {n})")
    e = np.sort(e, axis=1)
    keys = np.unique(e[:, 0] * n + e[:, 1])
    return np.stack([keys // n, keys % n], axis=1)


@dataclass(frozen=True, eq=False)
class Graph:
    """Node features ``X`` (n x d), labels ``Y`` (-1 = unlabeled), classes ``c`` and edges."""

    X: np.ndarray
    Y: np.ndarray
    c: int
    edges: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64, copy=True)
        if X.ndim != 2:
            raise MalformedFile("feature matrix must be 2-D")
        n = X.shape[0]
        if n < 1:
            raise MalformedFile("graph needs at least one node")
        Y = np.array(self.Y, dtype=np.int64, copy=True).reshape(-1)
        if Y.shape[0] != n:
            raise MalformedFile(f"expected {n} labels, got {Y.shape[0]}")
        if not np.all(np.isfinite(X)):
            raise MalformedFile("non-finite feature value")
        if int(self.c) < 1:
            raise MalformedFile("class count must be positive")
        if np.any(Y < -1) or np.any(Y >= int(self.c)):
            raise MalformedFile(f"label outside {{-1, 0..{int(self.c) - 1}}}")
        object.__setattr__(self, "X", _freeze(X))
        object.__setattr__(self, "Y", _freeze(Y))
        object.__setattr__(self, "c", int(self.c))
        object.__setattr__(self, "edges", _freeze(canonical_edges(self.edges, n)))
        # derived matrices (normalized adjacency etc.) keyed by consumer
        object.__setattr__(self, "cache", {})

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def m(self) -> int:
        return self.edges.shape[0]

    @cached_property
    def edge_keys(self) -> np.ndarray:
        return _freeze(self.edges[:, 0] * self.n + self.edges[:, 1])

    @cached_property
    def adjacency_sparse(self) -> sp.csr_matrix:
        n = self.n
        u, v = self.edges[:, 0], self.edges[:, 1]
        data = np.ones(2 * self.m)
        A = sp.csr_matrix((data, (np.r_[u, v], np.r_[v, u])), shape=(n, n))
        A.sort_indices()
        return A

    def adjacency(self) -> np.ndarray:
        """Dense symmetric 0/1 adjacency (a fresh copy)."""
        return self.adjacency_sparse.toarray()

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n)

    def has_edge(self, u: int, v: int) -> bool:
        if u == v:
            return False
        a, b = (u, v) if u < v else (v, u)
        key = a * self.n + b
        i = np.searchsorted(self.edge_keys, key)
        return bool(i < self.m and self.edge_keys[i] == key)

    def contains_pairs(self, pairs: np.ndarray) -> np.ndarray:
        pairs = np.sort(np.asarray(pairs, dtype=np.int64).reshape(-1, 2), axis=1)
        keys = pairs[:, 0] * self.n + pairs[:, 1]
        return np.isin(keys, self.edge_keys)

    def with_edges(self, edges) -> "Graph":
        return Graph(self.X, self.Y, self.c, edges)

    def permuted(self, perm) -> "Graph":
        """Relabel nodes so that old node ``i`` becomes ``perm[i]``."""
        perm = np.asarray(perm, dtype=np.int64)
        inv = np.argsort(perm)
        return Graph(self.X[inv], self.Y[inv], self.c, perm[self.edges])

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.c == other.c
            and self.X.shape == other.X.shape
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.Y, other.Y)
            and np.array_equal(self.edges, other.edges)
        )

    __hash__ = None


def _fmt(x: float) -> str:
    return repr(float(x))


def save_graph(graph: Graph, path) -> None:
    buf = io.StringIO()
    buf.write(f"{graph.n} {graph.d} {graph.c}\n")
    for row in graph.X:
        buf.write(" ".join(_fmt(x) for x in row) + "\n")
    buf.write(" ".join(str(int(y)) for y in graph.Y) + "\n")
    buf.write(f"{graph.m}\n")
    for u, v in graph.edges:
        buf.write(f"{u} {v}\n")
    try:
        Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="\n")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def load_graph(path) -> Graph:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    lines = [ln.strip() for ln in text.split("\n")]
    while lines and lines[-1] == "":
        lines.pop()
    try:
        n, d, c = (int(t) for t in lines[0].split())
    except (ValueError, IndexError):
        raise MalformedFile("header must be 'n d c'") from None
    if n < 1 or d < 0 or c < 1:
        raise MalformedFile("header values out of range")
    if len(lines) < n + 3:
        raise MalformedFile("file truncated")
    try:
        X = np.array(
            [[float(t) for t in lines[1 + i].split()] for i in range(n)], dtype=np.float64
        ).reshape(n, d)
    except ValueError:
        raise MalformedFile("feature rows must hold d decimals each") from None
    try:
        Y = np.array([int(t) for t in lines[1 + n].split()], dtype=np.int64)
        m = int(lines[2 + n])
    except ValueError:
        raise MalformedFile("bad label or edge-count line") from None
    if len(lines) != n + 3 + m:
        raise MalformedFile(f"expected {m} edge lines, found {len(lines) - n - 3}")
    edges = []
    for ln in lines[n + 3:]:
        parts = ln.split()
        if len(parts) != 2:
            raise MalformedFile(f"bad edge line {ln!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return Graph(X, Y, c, np.array(edges, dtype=np.int64).reshape(-1, 2))


def save_matrix(a, path) -> None:
    """Sidecar numeric format: ``rows cols`` header then row-major rows."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    buf = io.StringIO()
    buf.write(f"{a.shape[0]} {a.shape[1]}\n")
    for row in a:
        buf.write(" ".join(_fmt(x) for x in row) + "\n")
    try:
        Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="\n")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def load_matrix(path) -> np.ndarray:
    try:
        lines = Path(path).read_text(encoding="utf-8").split("\n")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    try:
        r, c = (int(t) for t in lines[0].split())
        vals = [float(t) for ln in lines[1:1 + r] for t in ln.split()]
        return np.array(vals, dtype=np.float64).reshape(r, c)
    except (ValueError, IndexError):
        raise MalformedFile("bad matrix sidecar") from None


def density(graph: Graph) -> float:
    n = graph.n
    if n < 2:
        raise DegenerateGraph("density needs at least two nodes")
    return graph.m / (n * (n - 1))


@dataclass(frozen=True, eq=False)
class EdgeDataset:
    """Node pairs with binary edge labels; columns ``u``, ``v``, ``y``."""

    u: np.ndarray
    v: np.ndarray
    y: np.ndarray
    n: int | None = None

    def __post_init__(self):
        u = _freeze(np.array(self.u, dtype=np.int64, copy=True).reshape(-1))
        v = _freeze(np.array(self.v, dtype=np.int64, copy=True).reshape(-1))
        y = _freeze(np.array(self.y, dtype=np.int64, copy=True).reshape(-1))
        if not (len(u) == len(v) == len(y)):
            raise BadParams("u, v, y must have equal length")
        if np.any(u == v):
            raise BadParams("edge dataset rows need u != v")
        if np.any((y != 0) & (y != 1)):
            raise BadParams("labels must be 0 or 1")
        if len(u) and (u.min() < 0 or v.min() < 0):
            raise BadParams("negative node id")
        if self.n is not None and len(u) and max(u.max(), v.max()) >= self.n:
            raise BadParams("node id outside source graph")
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        width = int(max(hi.max(initial=0), 0)) + 1
        if len(np.unique(lo * width + hi)) != len(u):
            raise BadParams("duplicate unordered pair")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_pairs(cls, pos, neg, n: int | None = None) -> "EdgeDataset":
        pos = np.asarray(pos, dtype=np.int64).reshape(-1, 2)
        neg = np.asarray(neg, dtype=np.int64).reshape(-1, 2)
        pairs = np.vstack([pos, neg])
        y = np.r_[np.ones(len(pos), dtype=np.int64), np.zeros(len(neg), dtype=np.int64)]
        return cls(pairs[:, 0], pairs[:, 1], y, n)

    def __len__(self):
        return len(self.y)

    @property
    def rows(self) -> list[tuple[int, int, int]]:
        return [(int(a), int(b), int(c)) for a, b, c in zip(self.u, self.v, self.y)]

    @property
    def positive(self) -> "EdgeDataset":
        keep = self.y == 1
        return EdgeDataset(self.u[keep], self.v[keep], self.y[keep], self.n)

    def take(self, idx) -> "EdgeDataset":
        return EdgeDataset(self.u[idx], self.v[idx], self.y[idx], self.n)

    def require_nonempty(self):
        if len(self) == 0:
            raise EmptyDataset("edge dataset is empty")


def save_edge_dataset(ds: EdgeDataset, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["u", "v", "y"])
    w.writerows(ds.rows)
    try:
        Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="\n")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def load_edge_dataset(path, n: int | None = None) -> EdgeDataset:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    try:
        u = [int(r["u"]) for r in rows]
        v = [int(r["v"]) for r in rows]
        y = [int(r["y"]) for r in rows]
    except (KeyError, ValueError):
        raise MalformedFile("edge dataset CSV needs integer columns u,v,y") from None
    return EdgeDataset(u, v, y, n)


def _pair_keys(pairs, n):
    pairs = np.sort(np.asarray(pairs, dtype=np.int64).reshape(-1, 2), axis=1)
    return pairs[:, 0] * n + pairs[:, 1]


def sample_negative_edges(graph: Graph, count: int, exclude=None, rng=None) -> np.ndarray:
    """Uniformly sample ``count`` distinct non-edges (u < v), avoiding ``exclude``."""
    rng = np.random.default_rng(rng)
    n = graph.n
    count = int(count)
    if count < 0:
        raise BadParams("count must be non-negative")
    blocked = graph.edge_keys
    if exclude is not None and len(exclude):
        blocked = np.union1d(blocked, _pair_keys(exclude, n))
    total = n * (n - 1) // 2
    available = total - len(blocked)
    if count > available:
        raise NotEnoughNegatives(f"asked for {count} negatives, only {available} exist")
    if count == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if total <= _ENUMERATE_LIMIT:
        iu, iv = np.triu_indices(n, k=1)
        keys = iu.astype(np.int64) * n + iv
        keys = keys[~np.isin(keys, blocked, assume_unique=True)]
        chosen = rng.choice(len(keys), size=count, replace=False)
        picked = keys[chosen]
    else:
        picked_set: dict[int, None] = {}
        blocked_set = set(blocked.tolist())
        while len(picked_set) < count:
            a = rng.integers(0, n, size=2 * (count - len(picked_set)) + 16)
            b = rng.integers(0, n, size=a.shape[0])
            for x, y in zip(a.tolist(), b.tolist()):
                if x == y:
                    continue
                k = min(x, y) * n + max(x, y)
                if k in blocked_set or k in picked_set:
                    continue
                picked_set[k] = None
                if len(picked_set) == count:
                    break
        picked = np.fromiter(picked_set, dtype=np.int64, count=count)
    return np.stack([picked // n, picked % n], axis=1)


@dataclass(frozen=True, eq=False)
class SplitBundle:
    train_nodes: np.ndarray
    val_nodes: np.ndarray
    test_nodes: np.ndarray
    train_pos: np.ndarray
    val_pos: np.ndarray
    test_pos: np.ndarray
    train_neg: np.ndarray
    val_neg: np.ndarray
    test_neg: np.ndarray

    def __post_init__(self):
        for f in self.__dataclass_fields__:
            object.__setattr__(self, f, _freeze(np.array(getattr(self, f), dtype=np.int64)))

    def edge_dataset(self, part: str, n: int | None = None) -> EdgeDataset:
        return EdgeDataset.from_pairs(getattr(self, f"{part}_pos"), getattr(self, f"{part}_neg"), n)

    def __eq__(self, other):
        if not isinstance(other, SplitBundle):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, f), getattr(other, f)) for f in self.__dataclass_fields__
        )

    __hash__ = None


def _ratio_sizes(total: int, ratios) -> tuple[int, int, int]:
    n_val = int(np.floor(total * ratios[1]))
    n_test = int(np.floor(total * ratios[2]))
    return total - n_val - n_test, n_val, n_test


def split_graph(graph: Graph, ratios=(0.7, 0.1, 0.2), rng=None) -> SplitBundle:
    """Node masks and positive/negative edge splits; remainders go to train."""
    rng = np.random.default_rng(rng)
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise BadParams("ratios must be three non-negative numbers summing to 1")
    if graph.m < 10:
        raise BadParams("split_graph needs at least 10 edges")
    labeled = np.flatnonzero(graph.Y >= 0)
    labeled = labeled[rng.permutation(len(labeled))]
    a, b, _ = _ratio_sizes(len(labeled), ratios)
    train_nodes = np.sort(labeled[:a])
    val_nodes = np.sort(labeled[a:a + b])
    test_nodes = np.sort(labeled[a + b:])

    order = rng.permutation(graph.m)
    a, b, _ = _ratio_sizes(graph.m, ratios)
    pos = [graph.edges[np.sort(order[:a])], graph.edges[np.sort(order[a:a + b])],
           graph.edges[np.sort(order[a + b:])]]
    neg_all = sample_negative_edges(graph, graph.m, rng=rng)
    neg = [neg_all[:a], neg_all[a:a + b], neg_all[a + b:]]
    return SplitBundle(train_nodes, val_nodes, test_nodes, *pos, *neg)


def synth_sbm(block_sizes, p_in: float, p_out: float, d: int, feature_noise: float = 0.0,
              rng=None) -> Graph:
    """Stochastic block model; label = block id, feature = one-hot block + Gaussian noise."""
    rng = np.random.default_rng(rng)
    sizes = [int(s) for s in block_sizes]
    k = len(sizes)
    if k < 1 or any(s < 1 for s in sizes):
        raise BadParams("need at least one non-empty block")
    if not (0.0 <= p_out < p_in <= 1.0):
        raise BadParams("need 0 <= p_out < p_in <= 1")
    if d < k:
        raise BadParams("feature dimension must be at least the block count")
    if feature_noise < 0:
        raise BadParams("feature_noise must be non-negative")
    labels = np.repeat(np.arange(k), sizes)
    n = len(labels)
    iu, iv = np.triu_indices(n, k=1)
    p = np.where(labels[iu] == labels[iv], p_in, p_out)
    keep = rng.random(len(iu)) < p
    X = np.zeros((n, d))
    X[np.arange(n), labels] = 1.0
    if feature_noise > 0:
        X += rng.normal(0.0, feature_noise, size=(n, d))
    return Graph(X, labels, k, np.stack([iu[keep], iv[keep]], axis=1))
