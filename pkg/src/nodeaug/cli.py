"""Command-line entry point: ``nodeaug {synth,train,defend,attack,run,report}``.

Exit status is 0 on success, 2 on a configuration error, 1 on any other failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .attacks import FEATURE_SETS, AttackKnowledge, AttackResult, write_attack_results
from .errors import ConfigError, NodeAugError
from .graph import save_graph, save_matrix
from .harness import (
    ATTACK_KEYS,
    ExperimentConfig,
    attack_scores,
    basic_pipeline,
    curve_path,
    defense_pipeline,
    emit_report,
    prepare,
    read_report,
    run_experiment_detailed,
    write_curve,
)

log = logging.getLogger("nodeaug")


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2 ** 64:
            raise ConfigError("--seed must fit in an unsigned 64-bit integer")
        cfg.seed = args.seed
    return cfg


def _out(args, cfg: ExperimentConfig | None, default: str) -> Path:
    if args.out:
        return Path(args.out)
    if cfg is not None and cfg.output:
        return Path(cfg.output)
    return Path(default)


def cmd_synth(args) -> None:
    cfg = _config(args)
    ctx = prepare(cfg)
    out = _out(args, None, "graph.txt")
    save_graph(ctx.graph, out)
    log.info("wrote graph n=%d m=%d to %s", ctx.graph.n, ctx.graph.m, out)


def cmd_train(args) -> None:
    cfg = _config(args)
    pipe = basic_pipeline(prepare(cfg))
    out = _out(args, None, "posteriors.txt")
    save_matrix(pipe.posteriors, out)
    log.info("wrote basic posteriors to %s", out)


def cmd_defend(args) -> None:
    cfg = _config(args)
    if cfg.defense.name == "none":
        raise ConfigError("'defend' needs a defense other than 'none'")
    pipe = defense_pipeline(prepare(cfg))
    out = _out(args, None, "defended.txt")
    save_matrix(pipe.posteriors, out)
    if pipe.curve:
        write_curve(pipe.curve, curve_path(out, pipe.name))
    log.info("wrote %s posteriors to %s", pipe.name, out)


def cmd_attack(args) -> None:
    cfg = _config(args)
    ctx = prepare(cfg)
    pipe = basic_pipeline(ctx) if cfg.defense.name == "none" else defense_pipeline(ctx)
    scores = attack_scores(ctx, pipe)
    results = []
    for a in cfg.attacks:
        if a == "linkteller":
            results.append(AttackResult("linkteller", "influence", scores["linkteller"], "query", cfg.seed))
        else:
            k = AttackKnowledge.for_setting(a, ctx.shadow)
            results.append(AttackResult(a, FEATURE_SETS[a], scores[f"attack{a}"], k.label(), cfg.seed))
    out = _out(args, None, "attacks.csv")
    write_attack_results(results, out)
    log.info("wrote %d attack results against %s to %s", len(results), pipe.name, out)


def cmd_run(args) -> None:
    cfg = _config(args)
    outcome = run_experiment_detailed(cfg)
    out = _out(args, cfg, "report.csv")
    emit_report(outcome.rows, out)
    for pipe in outcome.pipelines:
        if pipe.curve:
            write_curve(pipe.curve, curve_path(out, pipe.name))
    log.info("wrote %d rows to %s", len(outcome.rows), out)


def cmd_report(args) -> None:
    rows = read_report(args.input)
    if args.out:
        emit_report(rows, args.out)
        return
    used = [k for k in ATTACK_KEYS if any(k in r.auc for r in rows)]
    header = ["defense", "acc", "acc_loss"] + [f"{k}_auc" for k in used]
    print("\t".join(header))
    for r in rows:
        cells = [r.defense, f"{r.acc:.4f}", f"{r.acc_loss:+.4f}"]
        cells += [f"{r.auc[k]:.4f}" if k in r.auc else "-" for k in used]
        print("\t".join(cells))


COMMANDS = {
    "synth": (cmd_synth, "generate the configured dataset and save it in graph text format"),
    "train": (cmd_train, "train the undefended classifier and save its posteriors"),
    "defend": (cmd_defend, "run the configured defense and save the defended posteriors"),
    "attack": (cmd_attack, "run the configured attacks and write one CSV row per attack"),
    "run": (cmd_run, "full experiment: basic + defense + attacks, written as a report"),
    "report": (cmd_report, "print a report, or convert it between CSV and JSON with --out"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", help="output path")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(
        prog="nodeaug", description="Node-augmentation defense against GNN link stealing: experiments and reports.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name == "report":
            p.add_argument("input", help="report file (.csv or .json)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        COMMANDS[args.command][0](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NodeAugError, OSError, ValueError, FloatingPointError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
