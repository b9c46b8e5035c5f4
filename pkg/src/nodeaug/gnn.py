"""Two-layer GCN / GraphSAGE node classifiers and their training loop."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .errors import BadParams, EmptyMask, ShapeMismatch
from .graph import Graph


@dataclass
class TrainConfig:
    epochs: int = 200
    lr: float = 0.005
    weight_decay: float = 5e-4
    validate_every: int = 10
    hidden: int = 16
    dropout: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.lr < 0 or self.weight_decay < 0:
            raise BadParams("epochs, lr and weight_decay must be non-negative")
        if self.validate_every < 1 or self.hidden < 1:
            raise BadParams("validate_every and hidden must be positive")


@dataclass
class GnnParams:
    kind: str
    weights: dict[str, ad.Tensor]
    dropout: float = 0.5

    @property
    def tensors(self) -> list[ad.Tensor]:
        return [self.weights[k] for k in sorted(self.weights)]

    def copy(self) -> "GnnParams":
        return GnnParams(
            self.kind,
            {k: ad.Tensor(v.data.copy(), requires_grad=True) for k, v in self.weights.items()},
            self.dropout,
        )

    def checksum(self) -> str:
        import hashlib

        h = hashlib.sha256()
        for k in sorted(self.weights):
            h.update(k.encode())
            h.update(np.ascontiguousarray(self.weights[k].data).tobytes())
        return h.hexdigest()


def glorot(rng, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(kind: str, d: int, c: int, hidden: int = 16, rng=None, dropout: float = 0.5) -> GnnParams:
    rng = np.random.default_rng(rng)
    if kind == "gcn":
        shapes = {"W0": (d, hidden), "W1": (hidden, c)}
    elif kind == "sage":
        shapes = {"W0_self": (d, hidden), "W0_neigh": (d, hidden),
                  "W1_self": (hidden, c), "W1_neigh": (hidden, c)}
    else:
        raise BadParams(f"unknown model kind {kind!r}")
    weights = {k: ad.Tensor(glorot(rng, *s), requires_grad=True) for k, s in shapes.items()}
    return GnnParams(kind, weights, dropout)


def _gcn_norm_sparse(graph: Graph) -> sp.csr_matrix:
    if "gcn_norm" not in graph.cache:
        A = graph.adjacency_sparse + sp.identity(graph.n, format="csr")
        dinv = 1.0 / np.sqrt(np.asarray(A.sum(axis=1)).ravel())
        D = sp.diags(dinv)
        graph.cache["gcn_norm"] = (D @ A @ D).tocsr()
    return graph.cache["gcn_norm"]


def _mean_agg_sparse(graph: Graph) -> sp.csr_matrix:
    if "mean_agg" not in graph.cache:
        A = graph.adjacency_sparse
        deg = np.asarray(A.sum(axis=1)).ravel()
        inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
        graph.cache["mean_agg"] = (sp.diags(inv) @ A).tocsr()
    return graph.cache["mean_agg"]


def normalize_adjacency(graph: Graph) -> np.ndarray:
    """``D^-1/2 (A + I) D^-1/2`` with ``D`` the degree matrix of ``A + I``."""
    return _gcn_norm_sparse(graph).toarray()


def forward(params: GnnParams, graph: Graph, X=None, training: bool = False, rng=None) -> ad.Tensor:
    """Posterior tensor (n x c).  ``X`` defaults to ``graph.X``; pass a tensor to differentiate it."""
    X = ad.Tensor(graph.X) if X is None else ad.as_tensor(X)
    if X.shape[0] != graph.n:
        raise ShapeMismatch(f"features have {X.shape[0]} rows, graph has {graph.n} nodes")
    w = params.weights
    if params.kind == "gcn":
        P = _gcn_norm_sparse(graph)
        h = ad.relu(ad.spmm(P, ad.matmul(X, w["W0"])))
        h = ad.dropout(h, params.dropout, rng, training)
        return ad.row_softmax(ad.spmm(P, ad.matmul(h, w["W1"])))
    if params.kind == "sage":
        M = _mean_agg_sparse(graph)
        h = ad.relu(ad.add(ad.matmul(X, w["W0_self"]), ad.matmul(ad.spmm(M, X), w["W0_neigh"])))
        h = ad.dropout(h, params.dropout, rng, training)
        return ad.row_softmax(ad.add(ad.matmul(h, w["W1_self"]), ad.matmul(ad.spmm(M, h), w["W1_neigh"])))
    raise BadParams(f"unknown model kind {params.kind!r}")


def predict(params: GnnParams, graph: Graph, X=None) -> np.ndarray:
    """Inference-mode posteriors as a plain array."""
    X = None if X is None else ad.Tensor(ad.as_tensor(X).data)
    return forward(params, graph, X, training=False).data


def nll(posteriors: ad.Tensor, labels, nodes) -> ad.Tensor:
    """Mean of ``-log p[u, y_u]`` over ``nodes``."""
    nodes = np.asarray(nodes, dtype=np.int64).reshape(-1)
    if nodes.size == 0:
        raise EmptyMask("no nodes to average over")
    labels = np.asarray(labels, dtype=np.int64)
    y = labels[nodes]
    if np.any(y < 0):
        raise EmptyMask("loss nodes must be labeled")
    onehot = np.zeros((len(nodes), posteriors.shape[1]))
    onehot[np.arange(len(nodes)), y] = 1.0
    picked = ad.row_sum(ad.mul(ad.row_slice(posteriors, nodes), onehot))
    return ad.scale(ad.mean(ad.log(picked)), -1.0)


def accuracy(posteriors, labels, mask) -> float:
    mask = np.asarray(mask, dtype=np.int64).reshape(-1)
    if mask.size == 0:
        raise EmptyMask("accuracy over an empty mask")
    P = np.asarray(posteriors.data if isinstance(posteriors, ad.Tensor) else posteriors)
    pred = np.argmax(P[mask], axis=1)
    return float(np.mean(pred == np.asarray(labels)[mask]))


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: dict[int, float] = field(default_factory=dict)
    best_epoch: int = 0


def train_node_classifier(graph: Graph, train_nodes, val_nodes, config: TrainConfig | None = None,
                          rng=None, kind: str = "gcn", X=None, params: GnnParams | None = None):
    """Adam on masked NLL; returns the checkpoint with least validation loss.

    Validation runs every ``validate_every`` epochs.  ``X`` may carry extra
    (frozen) injected rows; it is never updated here.
    """
    config = config or TrainConfig()
    rng = np.random.default_rng(config.seed if rng is None else rng)
    train_nodes = np.asarray(train_nodes, dtype=np.int64)
    val_nodes = np.asarray(val_nodes, dtype=np.int64)
    if train_nodes.size == 0:
        raise EmptyMask("train mask is empty")
    if params is None:
        params = init_params(kind, graph.d, graph.c, config.hidden, rng, config.dropout)
    X = ad.Tensor(graph.X if X is None else ad.as_tensor(X).data)
    labels = graph.Y
    opt = ad.Adam(params.tensors, config.lr, config.weight_decay)
    history = TrainHistory()
    best, best_loss = params.copy(), np.inf
    for epoch in range(1, config.epochs + 1):
        out = forward(params, graph, X, training=True, rng=rng)
        history.train_loss.append(opt.step(nll(out, labels, train_nodes)))
        if epoch % config.validate_every == 0:
            ref = val_nodes if val_nodes.size else train_nodes
            vl = nll(forward(params, graph, X, training=False), labels, ref).item()
            history.val_loss[epoch] = vl
            if vl < best_loss:
                best, best_loss, history.best_epoch = params.copy(), vl, epoch
    if not history.val_loss:
        best = params.copy()
    return best, history
