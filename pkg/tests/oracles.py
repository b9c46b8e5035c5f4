"""Independent reference computations the tests compare the package against."""
import math
from collections import deque

import numpy as np

from nodeaug import autodiff as ad


def brute_force_auc(scores, labels):
    """Count positive/negative orderings directly; ties score one half."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = 0.0
    for p in pos:
        for q in neg:
            wins += 1.0 if p > q else 0.5 if p == q else 0.0
    return wins / (len(pos) * len(neg))


def hop_distances(n, edges, source):
    adj = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    dist = [math.inf] * n
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if dist[w] == math.inf:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def component_count(n, edges):
    seen, count = set(), 0
    for s in range(n):
        if s in seen:
            continue
        count += 1
        seen.update(i for i, d in enumerate(hop_distances(n, edges, s)) if d < math.inf)
    return count


def adjusted_rand_index(a, b):
    a, b = np.asarray(a), np.asarray(b)
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1)
    comb = lambda x: x * (x - 1) / 2.0  # noqa: E731
    sum_ij = comb(table).sum()
    sum_a = comb(table.sum(axis=1)).sum()
    sum_b = comb(table.sum(axis=0)).sum()
    expected = sum_a * sum_b / comb(len(a))
    top = 0.5 * (sum_a + sum_b)
    return 1.0 if top == expected else (sum_ij - expected) / (top - expected)


def kary_tree_edges_bfs(K, L):
    """Edges in the depth-L tree whose root has K children and other nodes K-1 children."""
    edges, frontier = 0, [0]
    for depth in range(L):
        nxt = []
        for node in frontier:
            kids = K if depth == 0 else K - 1
            edges += kids
            nxt.extend(range(kids))
        frontier = nxt
    return edges


def js_reference(p, q):
    """Jensen-Shannon divergence by direct summation with 0 log 0 = 0."""
    m = [(a + b) / 2 for a, b in zip(p, q)]
    kl = lambda x: sum(xi * math.log(xi / mi) for xi, mi in zip(x, m) if xi > 0)  # noqa: E731
    return 0.5 * kl(p) + 0.5 * kl(q)


# -- random op compositions ------------------------------------------------------

_UNARY = ("relu", "sigmoid", "exp_log", "softmax_log", "row_mean", "row_sum", "scale", "sqrt_exp",
          "row_slice", "tanh_like")
_BINARY = ("add", "sub", "mul", "div_pos", "matmul", "concat")


def random_composition(rng, max_dim=6):
    """A random differentiable expression ``f(*inputs) -> scalar`` and a point to evaluate it at.

    Ops are drawn from the catalogue; domain-restricted ones (log, sqrt, div)
    are applied to strictly positive intermediates so the check stays smooth.
    """
    r = int(rng.integers(1, max_dim + 1))
    c = int(rng.integers(1, max_dim + 1))
    k = int(rng.integers(1, max_dim + 1))
    shapes = [(r, c), (r, c), (c, k)]
    point = [rng.standard_normal(s) for s in shapes]
    plan = [(str(rng.choice(_UNARY)), str(rng.choice(_BINARY))) for _ in range(int(rng.integers(2, 5)))]
    idx = rng.integers(0, r, size=int(rng.integers(1, r + 2)))
    final = str(rng.choice(("sum", "mean")))

    def f(x, y, w):
        h = x
        for unary, binary in plan:
            h = _apply_unary(unary, h, idx)
            h = _apply_binary(binary, h, y, w)
        return ad.sum(h) if final == "sum" else ad.mean(h)

    return f, point, plan


def _apply_unary(name, h, idx):
    if name == "relu":
        return ad.apply("relu", h)
    if name == "sigmoid":
        return ad.apply("sigmoid", h)
    if name == "exp_log":
        return ad.apply("log", ad.apply("add", ad.apply("exp", ad.apply("scalar_mul", h, 0.5)), 1.0))
    if name == "softmax_log":
        return ad.apply("log", ad.apply("row_softmax", h))
    if name == "row_mean":
        return ad.apply("add", h, ad.apply("row_mean", h))
    if name == "row_sum":
        return ad.apply("mul", h, ad.apply("row_sum", ad.apply("sigmoid", h)))
    if name == "scale":
        return ad.apply("scalar_mul", h, -1.7)
    if name == "sqrt_exp":
        return ad.apply("sqrt", ad.apply("add", ad.apply("exp", ad.apply("scalar_mul", h, 0.3)), 0.5))
    if name == "row_slice":
        sliced = ad.apply("row_slice", h, idx[idx < h.shape[0]] if np.any(idx < h.shape[0]) else [0])
        return ad.apply("row_mean", sliced) if sliced.shape[0] != h.shape[0] else sliced
    if name == "tanh_like":
        return ad.apply("sub", ad.apply("scalar_mul", ad.apply("sigmoid", h), 2.0), 1.0)
    raise ValueError(name)


def _apply_binary(name, h, y, w):
    # y has the shape of the original x, w maps its columns; fall back to a
    # broadcast-safe operand when shapes no longer line up
    same = h.shape == y.shape
    if name == "matmul" and h.shape[1] == w.shape[0]:
        return ad.apply("matmul", h, w)
    if name == "concat" and h.shape[1] == y.shape[1]:
        return ad.apply("concat_rows", h, y)
    other = y if same else ad.apply("mean", y)
    if name == "add":
        return ad.apply("add", h, other)
    if name == "sub":
        return ad.apply("sub", h, other)
    if name == "mul":
        return ad.apply("mul", h, other)
    if name == "div_pos":
        return ad.apply("div", h, ad.apply("add", ad.apply("exp", other), 1.0))
    return ad.apply("add", h, other)
