"""Surrogate edge-query datasets: direct adjacency labels, or labels from a GVAE.

The GVAE encoder is a two-layer GCN with mean and log-variance heads; the
decoder is ``sigmoid(z_u . z_v)``.  It trains on squared error against
0/1 edge targets with no KL term.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import BadNodeId, BadParams, NotEnoughNegatives
from .gnn import _gcn_norm_sparse, glorot
from .graph import EdgeDataset, Graph, SplitBundle, sample_negative_edges, split_graph


@dataclass
class GvaeConfig:
    threshold: float = 0.5
    epochs: int = 200
    lr: float = 0.01
    latent: int = 16
    hidden: int = 32
    zero_init_heads: bool = False
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise BadParams("threshold must lie in (0, 1)")
        if self.epochs < 0 or self.latent < 1 or self.hidden < 1:
            raise BadParams("bad GVAE sizes")


@dataclass
class GvaeParams:
    W0: ad.Tensor
    W_mu: ad.Tensor
    W_logvar: ad.Tensor
    structure: Graph

    @property
    def tensors(self):
        return [self.W0, self.W_mu, self.W_logvar]


def _encode(params: GvaeParams, X):
    P = _gcn_norm_sparse(params.structure)
    h = ad.relu(ad.spmm(P, ad.matmul(X, params.W0)))
    Ph = ad.spmm(P, h)
    return ad.matmul(Ph, params.W_mu), ad.matmul(Ph, params.W_logvar)


def _decode(z: ad.Tensor, u, v) -> ad.Tensor:
    return ad.sigmoid(ad.row_sum(ad.mul(ad.row_slice(z, u), ad.row_slice(z, v))))


def train_gvae(graph: Graph, splits: SplitBundle, config: GvaeConfig | None = None, rng=None) -> GvaeParams:
    """Fit the encoder on train-split positives (target 1) and negatives (target 0).

    Message passing uses only the train-split positive edges.
    """
    config = config or GvaeConfig()
    rng = np.random.default_rng(config.seed if rng is None else rng)
    structure = Graph(graph.X, graph.Y, graph.c, splits.train_pos)
    heads = (lambda: np.zeros((config.hidden, config.latent))) if config.zero_init_heads else \
        (lambda: glorot(rng, config.hidden, config.latent))
    params = GvaeParams(
        ad.Tensor(glorot(rng, graph.d, config.hidden), requires_grad=True),
        ad.Tensor(heads(), requires_grad=True),
        ad.Tensor(heads(), requires_grad=True),
        structure,
    )
    pairs = np.vstack([splits.train_pos, splits.train_neg])
    target = np.r_[np.ones(len(splits.train_pos)), np.zeros(len(splits.train_neg))].reshape(-1, 1)
    X = ad.Tensor(graph.X)
    opt = ad.Adam(params.tensors, config.lr)
    for _ in range(config.epochs):
        mu, logvar = _encode(params, X)
        noise = rng.standard_normal(mu.shape)
        z = ad.add(mu, ad.mul(ad.exp(ad.scale(logvar, 0.5)), noise))
        err = ad.sub(_decode(z, pairs[:, 0], pairs[:, 1]), target)
        opt.step(ad.mean(ad.mul(err, err)))
    return params


def gvae_edge_prob(params: GvaeParams, graph: Graph, edges) -> np.ndarray:
    """Edge probabilities from the mean embedding (no sampling)."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= graph.n):
        raise BadNodeId("edge endpoint outside the graph")
    mu, _ = _encode(params, ad.Tensor(graph.X))
    return _decode(mu, edges[:, 0], edges[:, 1]).data.ravel()


def label_by_threshold(pairs, probs, threshold: float, n: int | None = None) -> EdgeDataset:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    y = (np.asarray(probs) > threshold).astype(np.int64)
    return EdgeDataset(pairs[:, 0], pairs[:, 1], y, n)


def generate_surrogate_edge_query_dataset(graph: Graph, config: GvaeConfig | None = None, rng=None,
                                          splits: SplitBundle | None = None) -> EdgeDataset:
    """All edges plus the train-split negatives, labelled by ``GVAE prob > threshold``."""
    config = config or GvaeConfig()
    rng = np.random.default_rng(config.seed if rng is None else rng)
    if graph.m == 0:
        raise BadParams("graph has no edges")
    if splits is None:
        splits = split_graph(graph, rng=rng)
    params = train_gvae(graph, splits, config, rng)
    big = np.vstack([graph.edges, splits.train_neg])
    return label_by_threshold(big, gvae_edge_prob(params, graph, big), config.threshold, graph.n)


def direct_edge_query_dataset(graph: Graph, rng=None, splits: SplitBundle | None = None) -> EdgeDataset:
    """Train-split positives labelled 1 plus as many sampled non-edges labelled 0.

    Without ``splits`` every edge is a positive and the negative count is
    capped by the number of non-edges that exist.
    """
    if graph.m == 0:
        raise BadParams("graph has no edges")
    if splits is not None:
        return EdgeDataset.from_pairs(splits.train_pos, splits.train_neg, graph.n)
    rng = np.random.default_rng(rng)
    available = graph.n * (graph.n - 1) // 2 - graph.m
    if available == 0:
        raise NotEnoughNegatives("complete graph has no non-edges")
    neg = sample_negative_edges(graph, min(graph.m, available), rng=rng)
    return EdgeDataset.from_pairs(graph.edges, neg, graph.n)
