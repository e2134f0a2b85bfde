"""Command-line entry point: validate, train, explain, mine, inspect.

Exit codes: 0 success, 1 ``inspect --strict`` with error findings, 2 bad input
or configuration.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import re
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, gbdt
from .config import RunConfig, load_config
from .eventlog import EventLog, build_log, evaluate_label
from .explain import GlobalExplanation, LocalExplanation, TrainingStats, explain_local, gain_importance, permutation_importance
from .ingest import parse_csv
from .inspection import (
    build_report,
    inspect_leakage,
    inspect_relevance,
    inspect_sparsity,
    inspect_static_dominance,
)
from .mine import discover_dfg, eventually_follows_ratio, min_prefix_index, precedes_ratio
from .pipeline import TrainedPipeline, train_pipeline
from .seeding import derive_rng, derive_seed

logger = logging.getLogger("ppminspect")

EXIT_OK, EXIT_FINDINGS, EXIT_INPUT = 0, 1, 2


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text, encoding="utf-8")
    logger.info("wrote %s", path)
    return path


def _safe(token: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", token)


def _sha(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:16]


def load_log(cfg: RunConfig) -> EventLog:
    events = parse_csv(cfg.log_path, cfg.mapping)
    if not events:
        raise ValueError(f"{cfg.log_path}: no events")
    return build_log(events)


def log_id(cfg: RunConfig) -> str:
    return _sha(cfg.log_path.read_bytes())


def model_id(model: gbdt.BoostedEnsemble) -> str:
    return _sha(json.dumps(model.to_dict(), sort_keys=True).encode())


# --- stages ------------------------------------------------------------------


def schema_report(cfg: RunConfig, log: EventLog) -> dict:
    report = {
        "log": str(cfg.log_path.name),
        "n_cases": len(log),
        "n_events": log.n_events,
        "n_activities": len(log.activities()),
        "trace_length": {
            "min": min(len(t) for t in log),
            "max": max(len(t) for t in log),
            "mean": float(np.mean([len(t) for t in log])),
        },
        "schema": log.schema.to_dict(),
    }
    if cfg.is_outcome:
        positives = sum(evaluate_label(t, cfg.target) for t in log)
        report["label"] = cfg.target.to_dict()
        report["positive_cases"] = positives
    return report


def write_training_outputs(tp: TrainedPipeline, out: Path) -> None:
    m = tp.metrics
    _write(out, "metrics.json", _dump(m.to_dict()))
    rows = ["prefix_length,metric_name,value"]
    for length, value in sorted(m.by_prefix_length.items()):
        if value is not None:  # AUC is undefined for single-class lengths
            rows.append(f"{length},{m.metric},{value!r}")
    _write(out, "plot_data.csv", "\n".join(rows) + "\n")
    for bid, model in sorted(tp.models.items()):
        _write(out / "models", f"{bid}.json", _dump(model.to_dict()))


def global_explanations(tp: TrainedPipeline, cfg: RunConfig) -> dict[str, GlobalExplanation]:
    out = {}
    ecfg = cfg.explanation
    for bid, model in sorted(tp.models.items()):
        if ecfg.global_method == "gain":
            out[bid] = gain_importance(model)
            continue
        # holdout prefixes when there are both classes, training prefixes otherwise
        matrix = tp.test_matrices.get(bid)
        if matrix is None or (model.task == gbdt.BINARY_LOGISTIC and len(np.unique(matrix.targets)) < 2):
            matrix = tp.train_matrices[bid]
        out[bid] = permutation_importance(
            model, matrix, repeats=ecfg.permutation_repeats, seed=derive_seed(cfg.seed, "explain", "permutation", bid)
        )
    return out


def local_explanation(tp: TrainedPipeline, cfg: RunConfig, case_id: str, length: int) -> tuple[str, LocalExplanation]:
    bid, matrix, i = tp.find_row(case_id, length)
    stats = TrainingStats.from_matrix(tp.train_matrices[bid])
    seed = derive_seed(cfg.seed, "explain", case_id, length)
    expl = explain_local(tp.models[bid], matrix.values[i], stats, cfg.explanation.local, seed=seed, row_id=(case_id, length))
    return bid, expl


def pick_instances(tp: TrainedPipeline, cfg: RunConfig) -> list[tuple[str, int]]:
    rows = sorted({r for m in tp.test_matrices.values() for r in m.row_ids})
    n = min(cfg.explanation.local_instances, len(rows))
    if n == 0:
        return []
    idx = derive_rng(cfg.seed, "explain", "instances").choice(len(rows), size=n, replace=False)
    return [rows[i] for i in sorted(idx)]


def mining_stats(cfg: RunConfig, log: EventLog) -> dict:
    graph = discover_dfg(log)
    stats = {
        "dfg": graph.to_dict(),
        "min_prefix_index": {a: min_prefix_index(log, a) for a in log.activities()},
    }
    if cfg.is_outcome:
        anchor = cfg.target.anchor
        if min_prefix_index(log, anchor) is not None:
            stats["label_activity"] = anchor
            stats["eventually_follows_ratio"] = {
                a: eventually_follows_ratio(log, anchor, a) for a in log.activities() if a != anchor
            }
            stats["precedes_ratio"] = {a: precedes_ratio(log, a, anchor) for a in log.activities() if a != anchor}
    return stats


def run_inspection(cfg: RunConfig, log: EventLog, out: Path):
    tp = train_pipeline(log, cfg.pipeline)
    write_training_outputs(tp, out)
    icfg = cfg.inspection
    globals_ = global_explanations(tp, cfg)
    _write(out, "global_explanation.json", _dump({b: g.to_dict() for b, g in globals_.items()}))

    findings = []
    for bid in sorted(tp.models):
        findings += inspect_sparsity(tp.train_matrices[bid], icfg, context=bid)
        if cfg.is_outcome:
            findings += inspect_leakage(globals_[bid], cfg.target, log, icfg, context=bid)
        else:
            findings += inspect_static_dominance(globals_[bid], log.schema, tp.models[bid].task, icfg, context=bid)
    for case_id, length in pick_instances(tp, cfg):
        bid, expl = local_explanation(tp, cfg, case_id, length)
        _write(out, f"local_{_safe(case_id)}_{length}.json", _dump(expl.to_dict()))
        findings += inspect_relevance(expl, length, log, icfg, context=bid)

    metadata = {
        "config_digest": cfg.digest(),
        "inspection_digest": icfg.digest(),
        "log_id": log_id(cfg),
        "model_ids": {bid: model_id(m) for bid, m in sorted(tp.models.items())},
        "seed": cfg.seed,
        "top_k": icfg.top_k,
        "importance_method": cfg.explanation.global_method,
        "version": __version__,
    }
    report = build_report(findings, metadata)
    _write(out, "inspection_report.json", report.to_json())
    _write(out, "inspection_report.txt", report.to_text())
    return report


# --- commands ----------------------------------------------------------------


def cmd_validate(cfg: RunConfig, args, out: Path) -> int:
    log = load_log(cfg)
    report = schema_report(cfg, log)
    _write(out, "schema_report.json", _dump(report))
    print(f"{cfg.log_path}: {report['n_cases']} cases, {report['n_events']} events, "
          f"{report['n_activities']} activities, {len(report['schema'])} attributes")
    return EXIT_OK


def cmd_train(cfg: RunConfig, args, out: Path) -> int:
    tp = train_pipeline(load_log(cfg), cfg.pipeline)
    write_training_outputs(tp, out)
    value = tp.metrics.value
    shown = "n/a" if value is None else f"{value:.4f}"
    print(f"trained {len(tp.models)} model(s); holdout {tp.metrics.metric} = {shown}")
    return EXIT_OK


def cmd_explain(cfg: RunConfig, args, out: Path) -> int:
    if (args.case is None) != (args.prefix is None):
        raise ValueError("--case and --prefix must be given together")
    tp = train_pipeline(load_log(cfg), cfg.pipeline)
    globals_ = global_explanations(tp, cfg)
    _write(out, "global_explanation.json", _dump({b: g.to_dict() for b, g in globals_.items()}))
    if args.case is not None:
        try:
            _, expl = local_explanation(tp, cfg, args.case, args.prefix)
        except KeyError as exc:
            raise ValueError(exc.args[0]) from None
        _write(out, f"local_{_safe(args.case)}_{args.prefix}.json", _dump(expl.to_dict()))
        for a in expl.attributions[:5]:
            print(f"{a.weight:+.4f}  {a.condition}")
    return EXIT_OK


def cmd_mine(cfg: RunConfig, args, out: Path) -> int:
    log = load_log(cfg)
    stats = mining_stats(cfg, log)
    _write(out, "dfg.dot", discover_dfg(log).to_dot())
    _write(out, "mining_stats.json", _dump(stats))
    print(f"{len(stats['dfg']['nodes'])} activities, {len(stats['dfg']['edges'])} directly-follows edges")
    return EXIT_OK


def cmd_inspect(cfg: RunConfig, args, out: Path) -> int:
    log = load_log(cfg)
    _write(out, "dfg.dot", discover_dfg(log).to_dot())
    report = run_inspection(cfg, log, out)
    s = report.summary
    print(f"{s['total']} finding(s): " + (", ".join(f"{k}={v}" for k, v in s["by_kind"].items()) or "none"))
    if args.strict and report.has_errors:
        return EXIT_FINDINGS
    return EXIT_OK


COMMANDS = {
    "validate": (cmd_validate, "parse the log and write a schema report"),
    "train": (cmd_train, "train bucket models and write metrics and plot data"),
    "explain": (cmd_explain, "write global and (with --case/--prefix) local explanations"),
    "mine": (cmd_mine, "write the directly-follows graph and order statistics"),
    "inspect": (cmd_inspect, "run the full pipeline and write the inspection report"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ppminspect", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, type=Path, help="JSON run configuration")
        p.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
        p.add_argument("--seed", type=int, help="global seed (overrides seed)")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "inspect":
            p.add_argument("--strict", action="store_true", help="exit 1 if any finding has error severity")
        if name == "explain":
            p.add_argument("--case", help="case id of the prefix to explain locally")
            p.add_argument("--prefix", type=int, help="prefix length of the prefix to explain locally")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    handler, _ = COMMANDS[args.command]
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ValueError("--seed must be non-negative")
            cfg = replace(cfg, seed=args.seed)
        out = args.out if args.out is not None else cfg.output_dir
        return handler(cfg, args, out)
    except (ValueError, OSError) as exc:
        # every library error type derives from ValueError and carries the file/row/field
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
