"""Augmented graph: zero-featured injected nodes, each wired to one spectral-cluster center."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import autodiff as ad
from .errors import BadParams
from .graph import Graph, load_graph, load_matrix, save_graph, save_matrix
from .spectral import spectral_cluster


@dataclass(eq=False)
class AugmentedGraph:
    """Base graph plus ``n_new`` injected nodes and their learnable feature overlay.

    ``theta`` holds the injected rows' features as a trainable tensor; the
    fixed part of those rows is zero, so the effective features are
    ``0 + theta``.  Node ids ``n .. n_aug-1`` are the injected ones.
    """

    base: Graph
    centers: np.ndarray
    Y_new: np.ndarray
    theta: ad.Tensor

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=np.int64).reshape(-1)
        self.Y_new = np.asarray(self.Y_new, dtype=np.int64).reshape(-1)
        if len(self.centers) != len(self.Y_new) or self.theta.shape != (len(self.centers), self.base.d):
            raise BadParams("centers, Y_new and theta disagree on n_new")

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def n_new(self) -> int:
        return len(self.centers)

    @property
    def n_aug(self) -> int:
        return self.base.n + self.n_new

    @property
    def new_nodes(self) -> np.ndarray:
        return np.arange(self.n, self.n_aug)

    @property
    def new_edges(self) -> np.ndarray:
        return np.stack([self.centers, self.new_nodes], axis=1)

    @property
    def Y_aug(self) -> np.ndarray:
        return np.r_[self.base.Y, self.Y_new]

    @property
    def X_aug(self) -> np.ndarray:
        return np.vstack([self.base.X, self.theta.data])

    @cached_property
    def graph(self) -> Graph:
        """Structure of the augmented graph (features are a snapshot of ``theta``)."""
        return Graph(self.X_aug, self.Y_aug, self.base.c, np.vstack([self.base.edges, self.new_edges]))

    def adjacency(self) -> np.ndarray:
        return self.graph.adjacency()

    def materialize(self) -> ad.Tensor:
        """``X`` stacked over ``zeros + theta``; gradients reach ``theta`` through the addition."""
        fixed = ad.Tensor(self.base.X)
        overlay = ad.add(ad.Tensor(np.zeros((self.n_new, self.base.d))), self.theta)
        return ad.concat_rows([fixed, overlay])

    def with_theta(self, values) -> "AugmentedGraph":
        values = np.array(values, dtype=np.float64).reshape(self.n_new, self.base.d)
        return AugmentedGraph(self.base, self.centers, self.Y_new, ad.Tensor(values, requires_grad=True))


def get_augmented_graph(graph: Graph, n_new: int, rng=None) -> AugmentedGraph:
    rng = np.random.default_rng(rng)
    if not 1 <= n_new <= graph.n:
        raise BadParams(f"need 1 <= n_new <= n, got {n_new}")
    clusters = spectral_cluster(graph, n_new, rng)
    y_new = rng.integers(0, graph.c, size=n_new)
    theta = ad.Tensor(np.zeros((n_new, graph.d)), requires_grad=True)
    return AugmentedGraph(graph, clusters.centers, y_new, theta)


def save_augmented(aug: AugmentedGraph, graph_path, theta_path) -> None:
    save_graph(aug.graph, graph_path)
    save_matrix(aug.theta.data, theta_path)


def load_augmented(graph_path, theta_path, n_new: int) -> AugmentedGraph:
    """Inverse of ``save_augmented``; the last ``n_new`` nodes are the injected ones."""
    g = load_graph(graph_path)
    theta = load_matrix(theta_path)
    n = g.n - n_new
    if theta.shape != (n_new, g.d):
        raise BadParams("theta sidecar shape does not match the augmented graph")
    base_edges = g.edges[(g.edges[:, 0] < n) & (g.edges[:, 1] < n)]
    new_edges = g.edges[g.edges[:, 1] >= n]
    order = np.argsort(new_edges[:, 1])
    base = Graph(g.X[:n], g.Y[:n], g.c, base_edges)
    return AugmentedGraph(base, new_edges[order, 0], g.Y[n:], ad.Tensor(theta, requires_grad=True))
