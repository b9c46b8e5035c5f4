"""Link-stealing attacks against node-classifier posteriors.

Eight knowledge settings are indexed by which of three resources the
attacker holds: target node attributes (F), a partial target graph (A) and
a shadow dataset (D').  LinkTeller, which needs query access to the model
rather than its posteriors, lives here as well.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import rankdata

from . import autodiff as ad
from . import kernels
from .errors import BadDelta, BadParams, EmptyMask, KnowledgeMismatch, OneClassOnly, ShapeMismatch
from .gnn import TrainConfig, glorot, predict, train_node_classifier
from .graph import EdgeDataset, Graph, SplitBundle, split_graph

SELECTORS = ("correlation_only", "posterior_distances", "all")
_CORR = kernels.DISTANCE_NAMES.index("correlation")
_COS = kernels.DISTANCE_NAMES.index("cosine")

# (F, A, D') each attack setting needs.
REQUIRED_KNOWLEDGE = {
    0: (False, False, False),
    1: (False, False, True),
    2: (True, False, False),
    3: (False, True, False),
    4: (False, True, True),
    5: (True, False, True),
    6: (True, True, False),
    7: (True, True, True),
}

FEATURE_SETS = {
    0: "correlation_only",
    1: "all/shadow",
    2: "posterior_distances+attributes/unsupervised",
    3: "all/partial_graph",
    4: "all/shadow+partial_graph",
    5: "all+reference+attributes/shadow",
    6: "all+attributes/partial_graph",
    7: "all+reference+attributes/shadow+partial_graph",
}


@dataclass(frozen=True)
class AttackKnowledge:
    has_attributes: bool = False
    has_partial_graph: bool = False
    shadow: Graph | None = None

    @classmethod
    def for_setting(cls, setting: int, shadow: Graph | None = None) -> "AttackKnowledge":
        f, a, d = REQUIRED_KNOWLEDGE[setting]
        return cls(f, a, shadow if d else None)

    @property
    def flags(self) -> tuple[bool, bool, bool]:
        return (self.has_attributes, self.has_partial_graph, self.shadow is not None)

    def label(self) -> str:
        f, a, d = self.flags
        return "({},{},{})".format("F" if f else "x", "A" if a else "x", "D'" if d else "x")


@dataclass
class AttackerMlpConfig:
    attacker_hidden: tuple[int, ...] = (32, 32, 32)
    attacker_epochs: int = 50
    attacker_lr: float = 0.005
    reference_hidden: tuple[int, ...] = (64, 32)
    reference_epochs: int = 50
    reference_lr: float = 0.01
    reference_weight_decay: float = 5e-4
    shadow_hidden: int = 32
    shadow_epochs: int = 100
    shadow_lr: float = 0.01
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self):
        self.attacker_hidden = tuple(int(h) for h in self.attacker_hidden)
        self.reference_hidden = tuple(int(h) for h in self.reference_hidden)
        sizes = (*self.attacker_hidden, *self.reference_hidden, self.shadow_hidden, self.batch_size)
        if any(s < 1 for s in sizes):
            raise BadParams("layer sizes and batch size must be positive")
        if min(self.attacker_epochs, self.reference_epochs, self.shadow_epochs) < 0:
            raise BadParams("epoch counts must be non-negative")
        if min(self.attacker_lr, self.reference_lr, self.shadow_lr) <= 0:
            raise BadParams("learning rates must be positive")


@dataclass(frozen=True)
class EdgeFeatureSet:
    selector: str = "all"
    with_attributes: bool = False

    def __post_init__(self):
        if self.selector not in SELECTORS:
            raise BadParams(f"unknown feature selector {self.selector!r}")

    @property
    def dim(self) -> int:
        base = {"correlation_only": 1, "posterior_distances": 8, "all": 10}[self.selector]
        return base + (8 if self.with_attributes else 0)


# ---------------------------------------------------------------- features


def _as_rows(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    return a.reshape(1, -1) if a.ndim == 1 else a


def _canonical(P: np.ndarray, Q: np.ndarray):
    """Order each pair lexicographically so every feature is exactly swap-invariant."""
    diff = P != Q
    first = np.argmax(diff, axis=1)
    rows = np.arange(len(P))
    swap = diff[rows, first] & (P[rows, first] > Q[rows, first])
    A, B = P.copy(), Q.copy()
    A[swap], B[swap] = Q[swap], P[swap]
    return A, B


def entropy_rows(P: np.ndarray) -> np.ndarray:
    P = np.asarray(P, dtype=np.float64)
    logs = np.log(np.where(P > 0, P, 1.0))
    return -(P * logs).sum(axis=1)


def posterior_pair_features(chi_u, chi_v, selector: str = "all", attr_u=None, attr_v=None) -> np.ndarray:
    """Edge features for posterior pairs; 1-D inputs give a vector, 2-D a matrix (one row per pair)."""
    single = np.ndim(chi_u) == 1
    P, Q = _as_rows(chi_u), _as_rows(chi_v)
    if P.shape != Q.shape:
        raise ShapeMismatch(f"posterior shapes differ: {P.shape} vs {Q.shape}")
    if selector not in SELECTORS:
        raise BadParams(f"unknown feature selector {selector!r}")
    P, Q = _canonical(P, Q)
    dists = kernels.pair_distances(P, Q)
    if selector == "correlation_only":
        parts = [dists[:, _CORR:_CORR + 1]]
    elif selector == "posterior_distances":
        parts = [dists]
    else:
        ent = np.sort(np.column_stack([entropy_rows(P), entropy_rows(Q)]), axis=1)
        parts = [dists, ent]
    if (attr_u is None) != (attr_v is None):
        raise ShapeMismatch("attribute rows must be given for both endpoints")
    if attr_u is not None:
        Fu, Fv = _as_rows(attr_u), _as_rows(attr_v)
        if Fu.shape != Fv.shape or len(Fu) != len(P):
            raise ShapeMismatch("attribute rows do not line up with posterior rows")
        parts.append(kernels.pair_distances(*_canonical(Fu, Fv)))
    out = np.hstack(parts)
    return out[0] if single else out


def _edge_features(post, pairs, selector, attrs=None, extra_post=()):
    u, v = pairs[:, 0], pairs[:, 1]
    blocks = [posterior_pair_features(post[u], post[v], selector)]
    for ref in extra_post:
        blocks.append(posterior_pair_features(ref[u], ref[v], "posterior_distances"))
    if attrs is not None:
        blocks.append(kernels.pair_distances(*_canonical(attrs[u], attrs[v])))
    return np.hstack(blocks)


# ---------------------------------------------------------------- scoring


def _check_binary(labels) -> np.ndarray:
    y = np.asarray(labels).reshape(-1)
    if y.size and not np.isin(y, (0, 1)).all():
        raise BadParams("labels must be 0/1")
    if not (np.any(y == 1) and np.any(y == 0)):
        raise OneClassOnly("AUC needs both positive and negative examples")
    return y.astype(np.int64)


def auc(scores, labels) -> float:
    """Probability a random positive outscores a random negative; ties count one half."""
    y = _check_binary(labels)
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    if s.shape != y.shape:
        raise ShapeMismatch("scores and labels differ in length")
    ranks = rankdata(s)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    return float((ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def attack0_unsupervised(posteriors, eval_edges: EdgeDataset) -> float:
    """AUC of ``-correlation_distance(chi_u, chi_v)`` over the evaluation pairs."""
    P = np.asarray(posteriors, dtype=np.float64)
    feats = posterior_pair_features(P[eval_edges.u], P[eval_edges.v], "correlation_only")
    return auc(-feats[:, 0], eval_edges.y)


# ---------------------------------------------------------------- MLPs


@dataclass
class MlpParams:
    layers: list[tuple[ad.Tensor, ad.Tensor]]
    mean: np.ndarray
    std: np.ndarray
    output: str  # "sigmoid" or "softmax"

    @property
    def tensors(self) -> list[ad.Tensor]:
        return [t for pair in self.layers for t in pair]

    def logits(self, features) -> ad.Tensor:
        h = ad.Tensor((np.asarray(features, dtype=np.float64) - self.mean) / self.std)
        for i, (W, b) in enumerate(self.layers):
            h = ad.add(ad.matmul(h, W), b)
            if i < len(self.layers) - 1:
                h = ad.relu(h)
        return h

    def predict(self, features) -> np.ndarray:
        z = self.logits(_as_rows(features))
        if self.output == "sigmoid":
            return ad.sigmoid(z).data.ravel()
        return ad.row_softmax(z).data


def _init_mlp(rng, sizes, mean, std, output) -> MlpParams:
    layers = [(ad.Tensor(glorot(rng, a, b), requires_grad=True), ad.Tensor(np.zeros((1, b)), requires_grad=True))
              for a, b in zip(sizes[:-1], sizes[1:])]
    return MlpParams(layers, mean, std, output)


def _standardizer(F: np.ndarray):
    mean = F.mean(axis=0, keepdims=True)
    std = F.std(axis=0, keepdims=True)
    return mean, np.where(std > 0, std, 1.0)


def _fit(params: MlpParams, F, loss_fn, epochs, lr, weight_decay, batch_size, rng):
    opt = ad.Adam(params.tensors, lr, weight_decay)
    n = len(F)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            opt.step(loss_fn(params.logits(F[idx]), idx))
    return params


def train_attacker_mlp(features, labels, config: AttackerMlpConfig | None = None, rng=None) -> MlpParams:
    """Binary edge classifier: relu hidden layers, sigmoid output, BCE, Adam on minibatches."""
    config = config or AttackerMlpConfig()
    rng = np.random.default_rng(config.seed if rng is None else rng)
    F = np.asarray(features, dtype=np.float64)
    F = F.reshape(-1, 1) if F.ndim == 1 else F
    y = _check_binary(labels).astype(np.float64)
    if len(F) != len(y):
        raise ShapeMismatch("features and labels differ in length")
    mean, std = _standardizer(F)
    params = _init_mlp(rng, (F.shape[1], *config.attacker_hidden, 1), mean, std, "sigmoid")

    def bce(z, idx):
        p = ad.sigmoid(z)
        t = y[idx].reshape(-1, 1)
        ll = ad.add(ad.mul(ad.log(p), t), ad.mul(ad.log(ad.sub(np.ones_like(t), p)), 1.0 - t))
        return ad.scale(ad.mean(ll), -1.0)

    return _fit(params, F, bce, config.attacker_epochs, config.attacker_lr, 0.0, config.batch_size, rng)


def train_reference_mlp(features, labels, config: AttackerMlpConfig | None = None, rng=None) -> MlpParams:
    """Attribute-only node classifier (softmax output) fitted on rows with a label ``>= 0``."""
    config = config or AttackerMlpConfig()
    rng = np.random.default_rng(config.seed if rng is None else rng)
    X = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    rows = np.flatnonzero(labels >= 0)
    if rows.size == 0:
        raise EmptyMask("no labeled rows for the reference model")
    c = int(labels.max()) + 1
    F = X[rows]
    onehot = np.eye(c)[labels[rows]]
    mean, std = _standardizer(F)
    params = _init_mlp(rng, (X.shape[1], *config.reference_hidden, c), mean, std, "softmax")

    def nll(z, idx):
        picked = ad.row_sum(ad.mul(ad.row_softmax(z), onehot[idx]))
        return ad.scale(ad.mean(ad.log(picked)), -1.0)

    return _fit(params, F, nll, config.reference_epochs, config.reference_lr,
                config.reference_weight_decay, config.batch_size, rng)


def reference_posteriors(features, labels, config: AttackerMlpConfig | None = None, rng=None) -> np.ndarray:
    """Softmax outputs of the attribute-only reference model for every row."""
    return train_reference_mlp(features, labels, config, rng).predict(features)


# ---------------------------------------------------------------- settings


def _check_knowledge(setting: int, knowledge: AttackKnowledge):
    if setting not in REQUIRED_KNOWLEDGE:
        raise BadParams(f"attack setting must be 0..7, got {setting}")
    need = REQUIRED_KNOWLEDGE[setting]
    have = knowledge.flags
    missing = [name for name, n, h in zip(("attributes", "partial graph", "shadow dataset"), need, have)
               if n and not h]
    if missing:
        raise KnowledgeMismatch(f"attack {setting} needs: {', '.join(missing)}")


def _rows(pos, neg):
    pos, neg = np.asarray(pos).reshape(-1, 2), np.asarray(neg).reshape(-1, 2)
    return np.vstack([pos, neg]), np.r_[np.ones(len(pos)), np.zeros(len(neg))]


def _zscore(a):
    sd = a.std()
    return (a - a.mean()) / (sd if sd > 0 else 1.0)


def _shadow_side(shadow: Graph, config: AttackerMlpConfig, use_attrs: bool, rng):
    """Shadow GCN posteriors, shadow edge rows and (optionally) the reference model."""
    r_split, r_gnn, r_ref = rng.spawn(3)
    sp = split_graph(shadow, rng=r_split)
    tc = TrainConfig(epochs=config.shadow_epochs, lr=config.shadow_lr, hidden=config.shadow_hidden)
    params, _ = train_node_classifier(shadow, sp.train_nodes, sp.val_nodes, tc, r_gnn, "gcn")
    post = predict(params, shadow)
    pairs, y = _rows(np.vstack([sp.train_pos, sp.val_pos, sp.test_pos]),
                     np.vstack([sp.train_neg, sp.val_neg, sp.test_neg]))
    ref = None
    if use_attrs:
        lab = np.full(shadow.n, -1)
        lab[sp.train_nodes] = shadow.Y[sp.train_nodes]
        ref = train_reference_mlp(shadow.X, lab, config, r_ref)
    return post, pairs, y, ref


def run_attack(setting: int, knowledge: AttackKnowledge, posteriors, graph: Graph, splits: SplitBundle,
               config: AttackerMlpConfig | None = None, rng=None) -> float:
    """AUC of attack ``setting`` on the target's positive+negative test edges.

    Resources beyond what the setting needs are ignored; missing ones raise
    ``KnowledgeMismatch``.  Target attributes are read only when the setting
    includes F and the train-split edges only when it includes A.
    """
    _check_knowledge(setting, knowledge)
    config = config or AttackerMlpConfig()
    rng = np.random.default_rng(config.seed if rng is None else rng)
    P = np.asarray(posteriors, dtype=np.float64)
    if P.shape[0] != graph.n:
        raise ShapeMismatch(f"posteriors have {P.shape[0]} rows, graph has {graph.n} nodes")
    use_f, use_a, use_d = REQUIRED_KNOWLEDGE[setting]
    test = splits.edge_dataset("test", graph.n)
    test_pairs = np.column_stack([test.u, test.v])

    if setting == 0:
        return attack0_unsupervised(P, test)
    if setting == 2:
        corr = posterior_pair_features(P[test.u], P[test.v], "posterior_distances")[:, _CORR]
        attr = kernels.pair_distances(*_canonical(graph.X[test.u], graph.X[test.v]))[:, _COS]
        return auc(-(_zscore(corr) + _zscore(attr)) / 2.0, test.y)

    r_shadow, r_ref_apply, r_mlp = rng.spawn(3)
    feats, labels = [], []
    target_ref = ()
    if use_d:
        s_post, s_pairs, s_y, ref = _shadow_side(knowledge.shadow, config, use_f, r_shadow)
        s_extra = ()
        if use_f:
            if knowledge.shadow.d != graph.d:
                raise ShapeMismatch("shadow and target attribute dimensions differ")
            s_extra = (ref.predict(knowledge.shadow.X),)
            target_ref = (ref.predict(graph.X),)
        feats.append(_edge_features(s_post, s_pairs, "all", knowledge.shadow.X if use_f else None, s_extra))
        labels.append(s_y)
    attrs = graph.X if use_f else None
    if use_a:
        a_pairs, a_y = _rows(splits.train_pos, splits.train_neg)
        feats.append(_edge_features(P, a_pairs, "all", attrs, target_ref))
        labels.append(a_y)
    mlp = train_attacker_mlp(np.vstack(feats), np.concatenate(labels), config, r_mlp)
    scores = mlp.predict(_edge_features(P, test_pairs, "all", attrs, target_ref))
    return auc(scores, test.y)


@dataclass(frozen=True)
class AttackResult:
    attack: int | str
    feature_set: str
    auc: float
    knowledge: str
    seed: int


def write_attack_results(results, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["attack", "feature_set", "auc", "knowledge", "seed"])
        for r in results:
            w.writerow([r.attack, r.feature_set, repr(float(r.auc)), r.knowledge, r.seed])


# ---------------------------------------------------------------- LinkTeller


@dataclass
class LinkTellerResult:
    scores: np.ndarray
    predicted: np.ndarray
    auc: float | None
    influence: dict = field(default_factory=dict, repr=False)


def gnn_query(params, graph: Graph) -> Callable[[np.ndarray], np.ndarray]:
    """Black-box posterior oracle over a fixed structure."""
    return lambda X: predict(params, graph, np.asarray(X, dtype=np.float64))


def influence_rows(query, X, nodes, delta: float = 1e-3) -> dict[int, np.ndarray]:
    """``influence[u][v] = ||query(X with row u scaled by 1+delta)[v] - query(X)[v]||_2 / delta``."""
    if not (np.isfinite(delta) and delta > 0):
        raise BadDelta(f"delta must be a positive finite number, got {delta}")
    X = np.asarray(X, dtype=np.float64)
    base = np.asarray(query(X))
    out = {}
    for u in np.unique(np.asarray(nodes, dtype=np.int64)):
        Xp = X.copy()
        Xp[u] *= 1.0 + delta
        out[int(u)] = np.linalg.norm(np.asarray(query(Xp)) - base, axis=1) / delta
    return out


def linkteller(query, X, pairs, delta: float = 1e-3, density_belief: float | None = None,
               labels=None) -> LinkTellerResult:
    """Influence-based edge inference over candidate ``pairs``.

    ``pairs`` is an ``EdgeDataset`` (labels taken from it) or a ``(k, 2)``
    array with optional ``labels``.  The belief defaults to the positive
    fraction of the candidate set; the top ``ceil(belief * k)`` scores are
    predicted as edges.
    """
    if isinstance(pairs, EdgeDataset):
        labels = pairs.y if labels is None else labels
        pairs = np.column_stack([pairs.u, pairs.v])
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if not (np.isfinite(delta) and delta > 0):
        raise BadDelta(f"delta must be a positive finite number, got {delta}")
    infl = influence_rows(query, X, pairs.ravel(), delta)
    scores = np.array([max(infl[u][v], infl[v][u]) for u, v in pairs], dtype=np.float64)
    if density_belief is None:
        density_belief = float(np.mean(labels)) if labels is not None and len(pairs) else 0.0
    if not 0.0 <= density_belief <= 1.0:
        raise BadParams("density belief must lie in [0, 1]")
    k = math.ceil(density_belief * len(pairs))
    top = np.argsort(-scores, kind="stable")[:k]
    value = auc(scores, labels) if labels is not None else None
    return LinkTellerResult(scores, pairs[np.sort(top)], value, infl)
