"""Edge-level differential-privacy perturbations of a graph's adjacency.

Both mechanisms keep nodes, features and labels and only rewrite the edge
set; a defended pipeline trains the ordinary GNN on the perturbed graph.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BadEpsilon, BadParams
from .graph import Graph

MECHANISMS = ("edge_rand", "lap_graph")


@dataclass
class DpConfig:
    mechanism: str = "edge_rand"
    epsilon: float = 6.0
    count_fraction: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise BadParams(f"unknown mechanism {self.mechanism!r}")
        _check_epsilon(self.epsilon)
        if not 0.0 < self.count_fraction < 1.0:
            raise BadParams("count_fraction must lie in (0, 1)")


def _check_epsilon(eps: float) -> float:
    eps = float(eps)
    if not eps > 0 or math.isnan(eps):
        raise BadEpsilon(f"epsilon must be positive, got {eps}")
    return eps


def flip_probability(eps: float) -> float:
    """Randomized-response flip rate ``1 / (1 + e^eps)``."""
    eps = _check_epsilon(eps)
    z = math.exp(-eps)
    return z / (1.0 + z)


def _upper_bits(graph: Graph):
    iu, ju = np.triu_indices(graph.n, k=1)
    return iu, ju, graph.adjacency()[iu, ju].astype(bool)


def _from_bits(graph: Graph, iu, ju, bits) -> Graph:
    edges = np.column_stack([iu[bits], ju[bits]])
    return Graph(graph.X, graph.Y, graph.c, edges)


def edge_rand(graph: Graph, eps: float, rng=None) -> Graph:
    """Flip every upper-triangle adjacency bit independently with probability ``1/(1+e^eps)``."""
    p = flip_probability(eps)
    rng = np.random.default_rng(rng)
    iu, ju, bits = _upper_bits(graph)
    flips = rng.random(bits.shape) < p
    return _from_bits(graph, iu, ju, bits ^ flips)


def lap_graph(graph: Graph, eps: float, rng=None, count_fraction: float = 0.01) -> Graph:
    """Keep the ``m_hat`` largest Laplace-noised cells, ``m_hat`` itself a noisy edge count.

    ``count_fraction * eps`` is spent on the count and the rest on the cells.
    """
    eps = _check_epsilon(eps)
    if not 0.0 < count_fraction < 1.0:
        raise BadParams("count_fraction must lie in (0, 1)")
    rng = np.random.default_rng(rng)
    m_hat = noisy_edge_count(graph, eps, rng, count_fraction)
    iu, ju, bits = _upper_bits(graph)
    noisy = bits + rng.laplace(0.0, 1.0 / ((1.0 - count_fraction) * eps), size=bits.shape)
    keep = np.zeros(bits.shape, dtype=bool)
    keep[np.argsort(-noisy, kind="stable")[:m_hat]] = True
    return _from_bits(graph, iu, ju, keep)


def noisy_edge_count(graph: Graph, eps: float, rng, count_fraction: float = 0.01) -> int:
    """``round(m + Laplace(1/(count_fraction*eps)))`` clamped to ``[0, n(n-1)/2]``.

    Draws exactly one variate from ``rng``; ``lap_graph`` calls it first, so
    replaying the same seed reproduces the count it used.
    """
    eps = _check_epsilon(eps)
    max_pairs = graph.n * (graph.n - 1) // 2
    raw = graph.m + rng.laplace(0.0, 1.0 / (count_fraction * eps))
    return int(min(max(round(raw), 0), max_pairs))


def perturb(graph: Graph, config: DpConfig, rng=None) -> Graph:
    rng = np.random.default_rng(config.seed if rng is None else rng)
    if config.mechanism == "edge_rand":
        return edge_rand(graph, config.epsilon, rng)
    return lap_graph(graph, config.epsilon, rng, config.count_fraction)
