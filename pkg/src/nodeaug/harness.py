"""Config-driven experiments: Basic pipeline, one defense, a set of attacks, one report.

Configs are JSON objects; every key is checked and unknown keys are
errors.  All randomness derives from the config seed through
``numpy.random.SeedSequence``, so a config+seed pair fully determines the
emitted report.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attacks import AttackerMlpConfig, AttackKnowledge, REQUIRED_KNOWLEDGE, gnn_query, linkteller, run_attack
from .defense import DefenseLossWeights, NargisConfig, TriOptConfig, augmented_query, run_nargis
from .dp import DpConfig, perturb
from .errors import BadParams, ConfigError, IoFailure
from .gnn import TrainConfig, accuracy, predict, train_node_classifier
from .graph import Graph, density, load_graph, split_graph, synth_sbm
from .spectral import recommended_cluster_count
from .surrogate import GvaeConfig

ATTACK_KEYS = tuple(f"attack{i}" for i in range(8)) + ("linkteller",)
CSV_COLUMNS = ("defense", "acc", "acc_loss",
               *(f"{k}_{s}" for k in ATTACK_KEYS for s in ("auc", "loss")),
               "seed", "runtime_s")
DEFENSES = ("none", "nargis", "nargis_tuned", "edge_rand", "lap_graph")
CURVE_COLUMNS = ("outer_t", "stage", "inner_step", "loss")


# ---------------------------------------------------------------- config


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _build(cls, obj, where):
    """Instantiate a config dataclass from a dict, rejecting unknown keys and bad values."""
    obj = {} if obj is None else obj
    _check_keys(obj, [f.name for f in dataclasses.fields(cls)], where)
    try:
        return cls(**obj)
    except (BadParams, TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass
class SynthSpec:
    block_sizes: list = field(default_factory=lambda: [100, 100])
    p_in: float = 0.05
    p_out: float = 0.002
    d: int = 16
    feature_noise: float = 1.0


@dataclass
class DatasetSpec:
    path: str | None = None
    synth: SynthSpec | None = None

    @classmethod
    def parse(cls, obj, where) -> "DatasetSpec":
        _check_keys(obj, ("path", "synth"), where)
        if ("path" in obj) == ("synth" in obj):
            raise ConfigError(f"{where} needs exactly one of 'path' or 'synth'")
        if "path" in obj:
            if not isinstance(obj["path"], str):
                raise ConfigError(f"{where}.path must be a string")
            return cls(path=obj["path"])
        return cls(synth=_build(SynthSpec, obj["synth"], f"{where}.synth"))

    def load(self, rng) -> Graph:
        if self.path is not None:
            return load_graph(self.path)
        s = self.synth
        return synth_sbm(s.block_sizes, s.p_in, s.p_out, s.d, s.feature_noise, rng)

    def to_dict(self):
        return {"path": self.path} if self.path is not None else {"synth": dataclasses.asdict(self.synth)}


@dataclass
class DefenseSpec:
    name: str = "none"
    epsilon: float | None = None
    count_fraction: float = 0.01
    weights: dict = field(default_factory=dict)

    @classmethod
    def parse(cls, obj) -> "DefenseSpec":
        if isinstance(obj, str):
            obj = {"name": obj}
        _check_keys(obj, ("name", "epsilon", "count_fraction", "weights"), "defense")
        spec = cls(**obj)
        if spec.name not in DEFENSES:
            raise ConfigError(f"defense must be one of {', '.join(DEFENSES)}")
        if spec.name in ("edge_rand", "lap_graph"):
            if spec.epsilon is None:
                raise ConfigError(f"{spec.name} needs 'epsilon'")
            _build(DpConfig, {"mechanism": spec.name, "epsilon": spec.epsilon,
                              "count_fraction": spec.count_fraction}, "defense")
        elif spec.epsilon is not None:
            raise ConfigError("'epsilon' only applies to edge_rand / lap_graph")
        if spec.weights and spec.name != "nargis_tuned":
            raise ConfigError("'weights' overrides only apply to nargis_tuned")
        _check_keys(spec.weights, [f.name for f in dataclasses.fields(DefenseLossWeights)], "defense.weights")
        return spec


@dataclass
class NargisSpec:
    n_new: int | str = "auto"
    ref_count: float | None = 10
    ref_density: float | None = 0.00144
    provider: str = "direct"
    triopt: TriOptConfig = field(default_factory=TriOptConfig)
    weights: DefenseLossWeights = field(default_factory=DefenseLossWeights)
    gvae: GvaeConfig = field(default_factory=GvaeConfig)

    @classmethod
    def parse(cls, obj) -> "NargisSpec":
        obj = {} if obj is None else obj
        _check_keys(obj, [f.name for f in dataclasses.fields(cls)], "nargis")
        spec = cls(
            n_new=obj.get("n_new", "auto"),
            ref_count=obj.get("ref_count", 10),
            ref_density=obj.get("ref_density", 0.00144),
            provider=obj.get("provider", "direct"),
            triopt=_build(TriOptConfig, obj.get("triopt"), "nargis.triopt"),
            weights=_build(DefenseLossWeights, obj.get("weights"), "nargis.weights"),
            gvae=_build(GvaeConfig, obj.get("gvae"), "nargis.gvae"),
        )
        if spec.provider not in ("direct", "gvae"):
            raise ConfigError("nargis.provider must be 'direct' or 'gvae'")
        if spec.n_new == "auto":
            if spec.ref_count is None or spec.ref_density is None:
                raise ConfigError("automatic n_new needs ref_count and ref_density")
        elif not (isinstance(spec.n_new, int) and spec.n_new >= 1):
            raise ConfigError("nargis.n_new must be a positive integer or 'auto'")
        return spec

    def resolve_n_new(self, graph: Graph) -> int:
        if self.n_new != "auto":
            return int(self.n_new)
        try:
            return recommended_cluster_count(self.ref_count, self.ref_density, density(graph))[1]
        except BadParams as exc:
            raise ConfigError(f"cannot derive n_new: {exc}") from exc


@dataclass
class LinkTellerSpec:
    delta: float = 1e-3
    density_belief: float | None = None


@dataclass
class ExperimentConfig:
    seed: int = 0
    dataset: DatasetSpec = field(default_factory=lambda: DatasetSpec(synth=SynthSpec()))
    model: str = "gcn"
    defense: DefenseSpec = field(default_factory=DefenseSpec)
    nargis: NargisSpec = field(default_factory=NargisSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    attack: AttackerMlpConfig = field(default_factory=AttackerMlpConfig)
    attacks: list = field(default_factory=lambda: [0])
    shadow: DatasetSpec | None = None
    linkteller: LinkTellerSpec = field(default_factory=LinkTellerSpec)
    output: str | None = None
    record_runtime: bool = False

    @classmethod
    def from_dict(cls, obj) -> "ExperimentConfig":
        _check_keys(obj, [f.name for f in dataclasses.fields(cls)], "config")
        seed = obj.get("seed", 0)
        if not (isinstance(seed, int) and not isinstance(seed, bool) and seed >= 0):
            raise ConfigError("seed must be a non-negative integer")
        model = obj.get("model", "gcn")
        if model not in ("gcn", "sage"):
            raise ConfigError("model must be 'gcn' or 'sage'")
        attacks = obj.get("attacks", [0])
        if not isinstance(attacks, list):
            raise ConfigError("attacks must be a list")
        seen = []
        for a in attacks:
            ok = a == "linkteller" or (isinstance(a, int) and not isinstance(a, bool) and a in REQUIRED_KNOWLEDGE)
            if not ok:
                raise ConfigError(f"unknown attack {a!r}; use 0..7 or 'linkteller'")
            if a in seen:
                raise ConfigError(f"attack {a!r} listed twice")
            seen.append(a)
        shadow = DatasetSpec.parse(obj["shadow"], "shadow") if obj.get("shadow") is not None else None
        if shadow is None and any(a != "linkteller" and REQUIRED_KNOWLEDGE[a][2] for a in attacks):
            raise ConfigError("attacks 1, 4, 5 and 7 need a 'shadow' dataset")
        output = obj.get("output")
        if output is not None and not isinstance(output, str):
            raise ConfigError("output must be a path string")
        record_runtime = obj.get("record_runtime", False)
        if not isinstance(record_runtime, bool):
            raise ConfigError("record_runtime must be true or false")
        cfg = cls(
            seed=seed,
            dataset=DatasetSpec.parse(obj.get("dataset", {"synth": {}}), "dataset"),
            model=model,
            defense=DefenseSpec.parse(obj.get("defense", "none")),
            nargis=NargisSpec.parse(obj.get("nargis")),
            train=_build(TrainConfig, obj.get("train"), "train"),
            attack=_build(AttackerMlpConfig, obj.get("attack"), "attack"),
            attacks=attacks,
            shadow=shadow,
            linkteller=_build(LinkTellerSpec, obj.get("linkteller"), "linkteller"),
            output=output,
            record_runtime=record_runtime,
        )
        cfg.weights_for_defense()
        return cfg

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(obj)

    def weights_for_defense(self) -> DefenseLossWeights:
        w = self.nargis.weights
        if self.defense.name == "nargis_tuned":
            try:
                w = dataclasses.replace(w, **self.defense.weights)
            except BadParams as exc:
                raise ConfigError(f"defense.weights: {exc}") from exc
        return w


# ---------------------------------------------------------------- rows


@dataclass
class ReportRow:
    defense: str
    acc: float
    acc_loss: float
    auc: dict
    auc_loss: dict
    seed: int
    runtime_s: float = 0.0

    def to_flat(self) -> dict:
        flat = {"defense": self.defense, "acc": self.acc, "acc_loss": self.acc_loss}
        for k in ATTACK_KEYS:
            flat[f"{k}_auc"] = self.auc.get(k)
            flat[f"{k}_loss"] = self.auc_loss.get(k)
        flat["seed"] = self.seed
        flat["runtime_s"] = self.runtime_s
        return flat

    @classmethod
    def from_flat(cls, flat) -> "ReportRow":
        auc = {k: flat[f"{k}_auc"] for k in ATTACK_KEYS if flat.get(f"{k}_auc") is not None}
        loss = {k: flat[f"{k}_loss"] for k in ATTACK_KEYS if flat.get(f"{k}_loss") is not None}
        return cls(flat["defense"], float(flat["acc"]), float(flat["acc_loss"]),
                   {k: float(v) for k, v in auc.items()}, {k: float(v) for k, v in loss.items()},
                   int(flat["seed"]), float(flat["runtime_s"]))


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_report(rows, path, fmt: str | None = None) -> None:
    """Write rows as CSV (fixed column order) or JSON (list of flat objects)."""
    path = Path(path)
    fmt = fmt or ("json" if path.suffix.lower() == ".json" else "csv")
    if fmt not in ("csv", "json"):
        raise BadParams("format must be 'csv' or 'json'")
    try:
        with open(path, "w", newline="") as fh:
            if fmt == "json":
                json.dump([r.to_flat() for r in rows], fh, indent=2)
                fh.write("\n")
            else:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(CSV_COLUMNS)
                for r in rows:
                    flat = r.to_flat()
                    w.writerow([_cell(flat[c]) for c in CSV_COLUMNS])
    except OSError as exc:
        raise IoFailure(f"cannot write report {path}: {exc}") from exc


def read_report(path) -> list[ReportRow]:
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            if path.suffix.lower() == ".json":
                return [ReportRow.from_flat(d) for d in json.load(fh)]
            rows = []
            for rec in csv.DictReader(fh):
                rows.append(ReportRow.from_flat({k: (v if v != "" else None) for k, v in rec.items()}))
            return rows
    except OSError as exc:
        raise IoFailure(f"cannot read report {path}: {exc}") from exc


def write_curve(curve, path) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CURVE_COLUMNS)
            for t, stage, step, loss in curve:
                w.writerow([t, stage, step, repr(float(loss))])
    except OSError as exc:
        raise IoFailure(f"cannot write loss curve {path}: {exc}") from exc


def curve_path(report_path, defense: str) -> Path:
    p = Path(report_path)
    return p.with_name(f"{p.stem}.{defense}.curve.csv")


# ---------------------------------------------------------------- pipelines


@dataclass
class Pipeline:
    name: str
    posteriors: np.ndarray
    query: object
    curve: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)


@dataclass
class ExperimentContext:
    config: ExperimentConfig
    graph: Graph
    splits: object
    shadow: Graph | None
    streams: dict


def _streams(seed: int) -> dict:
    names = ("data", "shadow", "split", "basic", "defense", "attacks")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return dict(zip(names, children))


def prepare(config: ExperimentConfig) -> ExperimentContext:
    s = _streams(config.seed)
    graph = config.dataset.load(np.random.default_rng(s["data"]))
    shadow = config.shadow.load(np.random.default_rng(s["shadow"])) if config.shadow else None
    splits = split_graph(graph, rng=np.random.default_rng(s["split"]))
    return ExperimentContext(config, graph, splits, shadow, s)


def basic_pipeline(ctx: ExperimentContext) -> Pipeline:
    cfg, g, sp = ctx.config, ctx.graph, ctx.splits
    params, _ = train_node_classifier(g, sp.train_nodes, sp.val_nodes, cfg.train,
                                      np.random.default_rng(ctx.streams["basic"]), cfg.model)
    return Pipeline("basic", predict(params, g), gnn_query(params, g), extra={"params": params})


def defense_pipeline(ctx: ExperimentContext) -> Pipeline:
    cfg, g, sp = ctx.config, ctx.graph, ctx.splits
    rng = np.random.default_rng(ctx.streams["defense"])
    name = cfg.defense.name
    if name in ("nargis", "nargis_tuned"):
        n_new = cfg.nargis.resolve_n_new(g)
        if n_new > g.n:
            raise ConfigError(f"n_new={n_new} exceeds the node count {g.n}")
        ncfg = NargisConfig(cfg.nargis.triopt, cfg.train, cfg.nargis.provider, cfg.nargis.gvae, cfg.model)
        res = run_nargis(g, n_new, ncfg, cfg.weights_for_defense(), rng, splits=sp)
        return Pipeline(name, res.posteriors, augmented_query(res.params, res.augmented),
                        res.log.curve, {"result": res, "n_new": n_new})
    if name in ("edge_rand", "lap_graph"):
        r_dp, r_train = rng.spawn(2)
        noisy = perturb(g, DpConfig(name, cfg.defense.epsilon, cfg.defense.count_fraction), r_dp)
        params, _ = train_node_classifier(noisy, sp.train_nodes, sp.val_nodes, cfg.train, r_train, cfg.model)
        return Pipeline(name, predict(params, noisy), gnn_query(params, noisy), extra={"graph": noisy})
    raise ConfigError(f"no defended pipeline for defense {name!r}")


def attack_scores(ctx: ExperimentContext, pipe: Pipeline) -> dict:
    """AUC per configured attack; each attack gets its own stream, shared across pipelines."""
    cfg, g, sp = ctx.config, ctx.graph, ctx.splits
    seeds = dict(zip(ATTACK_KEYS, ctx.streams["attacks"].spawn(len(ATTACK_KEYS))))
    out = {}
    for a in cfg.attacks:
        if a == "linkteller":
            res = linkteller(pipe.query, g.X, sp.edge_dataset("test", g.n),
                             cfg.linkteller.delta, cfg.linkteller.density_belief)
            out["linkteller"] = res.auc
        else:
            knowledge = AttackKnowledge.for_setting(a, ctx.shadow)
            out[f"attack{a}"] = run_attack(a, knowledge, pipe.posteriors, g, sp, cfg.attack,
                                           np.random.default_rng(seeds[f"attack{a}"]))
    return out


def _row(name, acc, aucs, base_acc, base_aucs, seed, runtime) -> ReportRow:
    return ReportRow(name, acc, base_acc - acc, aucs, {k: base_aucs[k] - v for k, v in aucs.items()},
                     seed, runtime)


@dataclass
class ExperimentOutcome:
    rows: list
    pipelines: list
    context: ExperimentContext


def run_experiment_detailed(config: ExperimentConfig) -> ExperimentOutcome:
    ctx = prepare(config)
    test = ctx.splits.test_nodes
    clock = time.perf_counter if config.record_runtime else (lambda: 0.0)

    t0 = clock()
    basic = basic_pipeline(ctx)
    base_acc = accuracy(basic.posteriors, ctx.graph.Y, test)
    base_aucs = attack_scores(ctx, basic)
    rows = [_row("basic", base_acc, base_aucs, base_acc, base_aucs, config.seed, clock() - t0)]
    pipes = [basic]
    if config.defense.name != "none":
        t0 = clock()
        pipe = defense_pipeline(ctx)
        acc = accuracy(pipe.posteriors, ctx.graph.Y, test)
        aucs = attack_scores(ctx, pipe)
        rows.append(_row(pipe.name, acc, aucs, base_acc, base_aucs, config.seed, clock() - t0))
        pipes.append(pipe)
    return ExperimentOutcome(rows, pipes, ctx)


def run_experiment(config: ExperimentConfig) -> list[ReportRow]:
    """Basic row first, then the configured defense; loss columns are ``basic - defended``."""
    if not isinstance(config, ExperimentConfig):
        config = ExperimentConfig.from_dict(config)
    return run_experiment_detailed(config).rows
