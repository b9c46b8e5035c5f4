"""Node-augmentation defense: loss terms, the three-stage feature learning loop,
retraining on the learned augmented graph, and the end-to-end pipeline.

All losses take a posterior tensor ``chi`` (one row per node of the graph the
GNN ran on) and an ``EdgeDataset``; they return 1x1 tensors so the same code
drives training and gradient checks.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
from scipy.special import rel_entr

from . import autodiff as ad
from .augment import AugmentedGraph, get_augmented_graph
from .errors import (
    BadParams,
    EmptyDataset,
    NoPositiveEdges,
    NotADistribution,
    ShapeMismatch,
    UnlabeledEndpoint,
)
from .gnn import GnnParams, TrainConfig, forward, glorot, init_params, nll, predict, train_node_classifier
from .graph import EdgeDataset, Graph, SplitBundle, split_graph
from .surrogate import GvaeConfig, direct_edge_query_dataset, generate_surrogate_edge_query_dataset


@dataclass
class DefenseLossWeights:
    miss: float = 4.0
    align: float = 0.8
    dist: float = 2.0
    corr: float = 0.6

    def __post_init__(self):
        for k in ("miss", "align", "dist", "corr"):
            v = float(getattr(self, k))
            if not np.isfinite(v) or v < 0:
                raise BadParams(f"weight {k} must be finite and >= 0")
            setattr(self, k, v)


@dataclass
class TriOptConfig:
    outer_epochs: int = 10
    class_epochs: int = 200
    def_epochs: int = 50
    surr_batch_size: int = 512
    class_lr: float = 0.01
    class_weight_decay: float = 5e-4
    surr_lr: float = 0.001
    def_lr: float = 0.001
    def_weight_decay: float = 5e-4
    attacker_hidden: int = 10
    hidden: int = 16
    dropout: float = 0.5
    resume_class: bool = True
    seed: int = 0

    def __post_init__(self):
        if min(self.outer_epochs, self.surr_batch_size, self.attacker_hidden, self.hidden) < 1:
            raise BadParams("epoch counts, batch size and sizes must be positive")
        if self.class_epochs < 0 or self.def_epochs < 0:
            raise BadParams("stage epoch counts must be non-negative")


# -- surrogate attacker -------------------------------------------------------------

@dataclass
class SurrogateAttackerParams:
    M: ad.Tensor

    def checksum(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.M.data).tobytes()).hexdigest()


def init_surrogate_attacker(c: int, hidden: int = 10, rng=None) -> SurrogateAttackerParams:
    rng = np.random.default_rng(rng)
    return SurrogateAttackerParams(ad.Tensor(glorot(rng, c, hidden), requires_grad=True))


def _pair_scores(chi: ad.Tensor, dataset: EdgeDataset, M) -> ad.Tensor:
    zu = ad.matmul(ad.row_slice(chi, dataset.u), M)
    zv = ad.matmul(ad.row_slice(chi, dataset.v), M)
    return ad.sigmoid(ad.row_sum(ad.mul(zu, zv)))


def surrogate_attacker_score(params, chi_u, chi_v) -> float:
    """``sigmoid((chi_u M) . (chi_v M))`` for one pair of posteriors."""
    M = params.M if isinstance(params, SurrogateAttackerParams) else ad.as_tensor(params)
    cu = np.asarray(chi_u, dtype=np.float64).reshape(1, -1)
    cv = np.asarray(chi_v, dtype=np.float64).reshape(1, -1)
    if cu.shape != cv.shape or cu.shape[1] != M.shape[0]:
        raise ShapeMismatch("posterior length must equal the attacker's row count")
    z = ad.sigmoid(ad.row_sum(ad.mul(ad.matmul(cu, M), ad.matmul(cv, M))))
    return z.item()


# -- loss terms ---------------------------------------------------------------------

def _require_rows(dataset: EdgeDataset):
    if len(dataset) == 0:
        raise EmptyDataset("edge dataset is empty")


def _positive(dataset: EdgeDataset) -> EdgeDataset:
    pos = dataset.positive
    if len(pos) == 0:
        raise NoPositiveEdges("loss needs at least one y=1 row")
    return pos


def loss_class(chi: ad.Tensor, labels, nodes, n_original: int | None = None) -> ad.Tensor:
    nodes = np.asarray(nodes, dtype=np.int64).reshape(-1)
    if n_original is not None:
        nodes = nodes[nodes < n_original]
    return nll(chi, labels, nodes)


def loss_attack(dataset: EdgeDataset, chi: ad.Tensor, attacker) -> ad.Tensor:
    _require_rows(dataset)
    M = attacker.M if isinstance(attacker, SurrogateAttackerParams) else attacker
    s = _pair_scores(chi, dataset, M)
    y = dataset.y.reshape(-1, 1).astype(np.float64)
    bce = ad.add(ad.mul(y, ad.log(s)), ad.mul(1.0 - y, ad.log(ad.sub(1.0, s))))
    return ad.scale(ad.mean(bce), -1.0)


def jensen_shannon(p, q) -> float:
    """Jensen-Shannon divergence (natural log) of two probability vectors."""
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    if p.shape != q.shape:
        raise ShapeMismatch("distributions differ in length")
    for x in (p, q):
        if np.any(x < 0) or abs(x.sum() - 1.0) > 1e-9:
            raise NotADistribution("entries must be non-negative and sum to 1")
    m = 0.5 * (p + q)
    return float(0.5 * rel_entr(p, m).sum() + 0.5 * rel_entr(q, m).sum())


def _js_rows(P: ad.Tensor, Q: ad.Tensor) -> ad.Tensor:
    M = ad.scale(ad.add(P, Q), 0.5)
    logm = ad.log(M)
    kl_p = ad.row_sum(ad.mul(P, ad.sub(ad.log(P), logm)))
    kl_q = ad.row_sum(ad.mul(Q, ad.sub(ad.log(Q), logm)))
    return ad.scale(ad.add(kl_p, kl_q), 0.5)


def loss_dist(dataset: EdgeDataset, chi: ad.Tensor) -> ad.Tensor:
    pos = _positive(dataset)
    js = _js_rows(ad.row_slice(chi, pos.u), ad.row_slice(chi, pos.v))
    return ad.scale(ad.mean(js), -1.0)


def _centered(rows: ad.Tensor) -> ad.Tensor:
    return ad.sub(rows, ad.row_mean(rows))


def loss_corr(dataset: EdgeDataset, chi: ad.Tensor) -> ad.Tensor:
    """Mean over positive rows of ``corr - 1``; zero-variance posteriors count as corr 0."""
    pos = _positive(dataset)
    cu = _centered(ad.row_slice(chi, pos.u))
    cv = _centered(ad.row_slice(chi, pos.v))
    ssu = ad.row_sum(ad.mul(cu, cu))
    ssv = ad.row_sum(ad.mul(cv, cv))
    live = ((ssu.data > 1e-30) & (ssv.data > 1e-30)).astype(np.float64)
    # dead rows get a unit denominator and a zeroed numerator
    denom = ad.mul(ad.sqrt(ad.add(ssu, 1.0 - live)), ad.sqrt(ad.add(ssv, 1.0 - live)))
    corr = ad.div(ad.mul(ad.row_sum(ad.mul(cu, cv)), live), denom)
    return ad.mean(ad.sub(corr, 1.0))


def loss_align(dataset: EdgeDataset, chi: ad.Tensor, labels) -> ad.Tensor:
    _require_rows(dataset)
    labels = np.asarray(labels, dtype=np.int64)
    yu, yv = labels[dataset.u], labels[dataset.v]
    if np.any(yu < 0) or np.any(yv < 0):
        raise UnlabeledEndpoint("alignment loss needs labeled endpoints")
    c = chi.shape[1]
    rows = np.arange(len(dataset))
    hot_u = np.zeros((len(dataset), c))
    hot_v = np.zeros((len(dataset), c))
    hot_u[rows, yu] = 1.0
    hot_v[rows, yv] = 1.0
    pu = ad.row_sum(ad.mul(ad.row_slice(chi, dataset.u), hot_u))
    pv = ad.row_sum(ad.mul(ad.row_slice(chi, dataset.v), hot_v))
    return ad.scale(ad.mean(ad.add(ad.log(pu), ad.log(pv))), -1.0)


def loss_miss(dataset: EdgeDataset, chi: ad.Tensor, attacker) -> ad.Tensor:
    """Mean of ``-log(1 - p_true)`` where ``p_true`` is the attacker's mass on the true label."""
    _require_rows(dataset)
    M = attacker.M if isinstance(attacker, SurrogateAttackerParams) else attacker
    g = _pair_scores(chi, dataset, M)
    y = dataset.y.reshape(-1, 1).astype(np.float64)
    # 1 - p_true = y(1 - g) + (1 - y) g
    wrong = ad.add(ad.mul(y, ad.sub(1.0, g)), ad.mul(1.0 - y, g))
    return ad.scale(ad.mean(ad.log(wrong)), -1.0)


def loss_defense(dataset: EdgeDataset, chi: ad.Tensor, labels, attacker,
                 weights: DefenseLossWeights) -> ad.Tensor:
    total = ad.scale(loss_miss(dataset, chi, attacker), weights.miss)
    total = ad.add(total, ad.scale(loss_align(dataset, chi, labels), weights.align))
    total = ad.add(total, ad.scale(loss_dist(dataset, chi), weights.dist))
    return ad.add(total, ad.scale(loss_corr(dataset, chi), weights.corr))


# -- tri-level loop -------------------------------------------------------------------

@dataclass
class TriOptLog:
    """Per-step losses and the parameter checksums used to audit stage isolation."""

    curve: list[tuple[int, str, int, float]] = field(default_factory=list)
    attacker_checksums: list[str] = field(default_factory=list)
    gnn_checksums_stage3: list[tuple[str, str]] = field(default_factory=list)
    theta_after_stage1: list[np.ndarray] = field(default_factory=list)
    theta_after_stage3: list[np.ndarray] = field(default_factory=list)


def _train_surrogate(chi: np.ndarray, dataset: EdgeDataset, attacker: SurrogateAttackerParams,
                     config: TriOptConfig, rng, log: TriOptLog):
    opt = ad.Adam([attacker.M], config.surr_lr)
    chi_t = ad.Tensor(chi)
    order = rng.permutation(len(dataset))
    for step, start in enumerate(range(0, len(order), config.surr_batch_size)):
        batch = dataset.take(order[start:start + config.surr_batch_size])
        loss = opt.step(loss_attack(batch, chi_t, attacker))
        log.curve.append((0, "surrogate", step, loss))


def run_tri_optimization(aug: AugmentedGraph, dataset: EdgeDataset, config: TriOptConfig | None = None,
                         weights: DefenseLossWeights | None = None, rng=None, train_nodes=None,
                         kind: str = "gcn", log: TriOptLog | None = None) -> AugmentedGraph:
    """Learn the injected nodes' features; returns a new ``AugmentedGraph`` carrying them.

    Stage 1 fits the GNN and ``theta`` jointly on node classification,
    Stage 2 (first outer round only) fits the surrogate attacker with both
    frozen, Stage 3 moves ``theta`` alone against the defense loss.
    """
    config = config or TriOptConfig()
    weights = weights or DefenseLossWeights()
    rng = np.random.default_rng(config.seed if rng is None else rng)
    log = log if log is not None else TriOptLog()
    dataset.require_nonempty()
    base = aug.base
    if train_nodes is None:
        train_nodes = np.flatnonzero(base.Y >= 0)
    train_nodes = np.asarray(train_nodes, dtype=np.int64)
    labels = aug.Y_aug
    structure = aug.graph
    work = aug.with_theta(aug.theta.data)
    theta = work.theta

    r_init, r_surr, r_drop = rng.spawn(3)
    gnn = init_params(kind, base.d, base.c, config.hidden, r_init, config.dropout)
    attacker = init_surrogate_attacker(base.c, config.attacker_hidden, r_init)
    class_opt = ad.Adam(gnn.tensors + [theta], config.class_lr, config.class_weight_decay)
    def_opt = ad.Adam([theta], config.def_lr, config.def_weight_decay)

    for t in range(config.outer_epochs):
        if t > 0 and not config.resume_class:
            gnn = init_params(kind, base.d, base.c, config.hidden, r_init, config.dropout)
            class_opt = ad.Adam(gnn.tensors + [theta], config.class_lr, config.class_weight_decay)
        # Stage 1
        for step in range(config.class_epochs):
            chi = forward(gnn, structure, work.materialize(), training=True, rng=r_drop)
            loss = class_opt.step(loss_class(chi, labels, train_nodes, base.n))
            log.curve.append((t, "class", step, loss))
        log.theta_after_stage1.append(theta.data.copy())
        # Stage 2
        if t == 0:
            chi = predict(gnn, structure, work.materialize())
            _train_surrogate(chi, dataset, attacker, config, r_surr, log)
        log.attacker_checksums.append(attacker.checksum())
        # Stage 3
        before = gnn.checksum()
        for step in range(config.def_epochs):
            chi = forward(gnn, structure, work.materialize(), training=False)
            loss = def_opt.step(loss_defense(dataset, chi, labels, attacker, weights))
            log.curve.append((t, "defense", step, loss))
        log.gnn_checksums_stage3.append((before, gnn.checksum()))
        log.theta_after_stage3.append(theta.data.copy())
    return aug.with_theta(theta.data)


def train_on_augmented(aug: AugmentedGraph, train_config: TrainConfig | None = None,
                       train_nodes=None, val_nodes=None, rng=None, kind: str = "gcn") -> GnnParams:
    """Train a freshly initialised GNN on the augmented graph with ``theta`` frozen."""
    train_config = train_config or TrainConfig()
    if train_nodes is None:
        train_nodes = np.flatnonzero(aug.base.Y >= 0)
    val_nodes = np.zeros(0, dtype=np.int64) if val_nodes is None else val_nodes
    params, _ = train_node_classifier(aug.graph, train_nodes, val_nodes, train_config, rng, kind, X=aug.X_aug)
    return params


def learn_perturbed_graph_embedding(aug: AugmentedGraph, train_config: TrainConfig | None = None,
                                    train_nodes=None, val_nodes=None, rng=None,
                                    kind: str = "gcn") -> np.ndarray:
    """Posteriors for all ``n_aug`` nodes from a GNN retrained on the augmented graph."""
    params = train_on_augmented(aug, train_config, train_nodes, val_nodes, rng, kind)
    return predict(params, aug.graph, aug.X_aug)


def augmented_query(params: GnnParams, aug: AugmentedGraph):
    """Black-box view of a defended model: original-node features in, original-node posteriors out."""
    n, theta = aug.n, aug.theta.data.copy()

    def query(X):
        X = np.asarray(X, dtype=np.float64)
        return predict(params, aug.graph, np.vstack([X, theta]))[:n]

    return query


@dataclass
class NargisConfig:
    triopt: TriOptConfig = field(default_factory=TriOptConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    provider: str = "direct"
    gvae: GvaeConfig = field(default_factory=GvaeConfig)
    kind: str = "gcn"

    def __post_init__(self):
        if self.provider not in ("direct", "gvae"):
            raise BadParams("provider must be 'direct' or 'gvae'")


@dataclass
class NargisResult:
    posteriors: np.ndarray
    augmented: AugmentedGraph
    dataset: EdgeDataset
    log: TriOptLog
    posteriors_aug: np.ndarray
    params: GnnParams


def run_nargis(graph: Graph, n_new: int, config: NargisConfig | None = None,
               weights: DefenseLossWeights | None = None, rng=None,
               splits: SplitBundle | None = None) -> NargisResult:
    config = config or NargisConfig()
    rng = np.random.default_rng(rng)
    r_aug, r_split, r_data, r_tri, r_emb = rng.spawn(5)
    if splits is None:
        splits = split_graph(graph, rng=r_split)
    aug = get_augmented_graph(graph, n_new, r_aug)
    if config.provider == "direct":
        dataset = direct_edge_query_dataset(graph, r_data, splits=splits)
    else:
        dataset = generate_surrogate_edge_query_dataset(graph, config.gvae, r_data, splits=splits)
    log = TriOptLog()
    learned = run_tri_optimization(aug, dataset, config.triopt, weights, r_tri,
                                   splits.train_nodes, config.kind, log)
    params = train_on_augmented(learned, config.train, splits.train_nodes, splits.val_nodes,
                                r_emb, config.kind)
    phi_aug = predict(params, learned.graph, learned.X_aug)
    return NargisResult(phi_aug[:graph.n].copy(), learned, dataset, log, phi_aug, params)


def nargis(graph: Graph, n_new: int, config: NargisConfig | None = None,
           weights: DefenseLossWeights | None = None, rng=None,
           splits: SplitBundle | None = None) -> np.ndarray:
    """Defended posteriors for the original ``n`` nodes."""
    return run_nargis(graph, n_new, config, weights, rng, splits).posteriors
