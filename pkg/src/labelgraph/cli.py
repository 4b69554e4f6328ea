"""Command line surface: generate, train, eval, predict, explain.

Options come from a JSON config file plus flags, with flags winning; the
effective configuration is echoed into the output directory. A seed is
mandatory so no run ever depends on the wall clock, and all randomness
flows from that one seed through named substreams.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import data as gdata
from . import report
from .errors import ConfigError, Error
from .explain import export_trace, rooted_subgraph, top_k_nodes
from .metrics import PredictionSet, metrics_report, per_label_rows
from .model import config_from_dict, config_to_dict, predict_scores
from .training import (evaluate_scores, load_checkpoint, save_checkpoint,
                       train, train_config_from_dict)

CONFIG_KEYS = {"seed", "out", "threads", "threshold", "data", "model", "train"}
DATA_KEYS = {"train", "valid", "test", "kind", "label_graph", "label_threshold"}


def _load_json(path):
    with open(path, "r", encoding="utf8") as handle:
        return json.load(handle)


def _dump_json(doc, path):
    with open(path, "w", encoding="utf8") as handle:
        json.dump(doc, handle, indent=2, sort_keys=True)
        handle.write("\n")


def load_run_config(path, overrides: dict) -> dict:
    cfg = _load_json(path) if path else {}
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    gdata.reject_unknown_keys(cfg, CONFIG_KEYS, "config")
    gdata.reject_unknown_keys(cfg.get("data", {}), DATA_KEYS, "config.data")
    for key, value in overrides.items():
        if value is None:
            continue
        if key in ("label_graph", "label_threshold"):
            cfg.setdefault("data", {})[key] = value
        elif key in ("attention", "factors"):
            cfg.setdefault("model", {})[key] = value
        else:
            cfg[key] = value
    if cfg.get("seed") is None:
        raise ConfigError("a seed is required (config key 'seed' or --seed)")
    return cfg


def _build_configs(cfg: dict):
    model_config = config_from_dict(dict(cfg.get("model", {})))
    train_cfg = dict(cfg.get("train", {}))
    train_cfg.setdefault("seed", cfg["seed"])
    return model_config, train_config_from_dict(train_cfg)


def _load_dataset(path, kind: str):
    if kind == "vector":
        return gdata.load_vector_dataset(path)
    return gdata.load_graph_dataset(path)


def _attach_label_graph(dataset, data_cfg):
    path = data_cfg.get("label_graph")
    if path:
        threshold = float(data_cfg.get("label_threshold", 0.5))
        dataset.label_graph = gdata.load_label_graph(path, dataset.num_labels, threshold)
    return dataset


def _out_dir(cfg) -> Path:
    out = cfg.get("out")
    if not out:
        raise ConfigError("an output directory is required (config key 'out' or --out)")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    spec = gdata.motif_spec_from_dict(_load_json(args.spec))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset, records = gdata.generate_synthetic(spec, args.n, args.seed,
                                                return_records=True)
    train_set, valid_set, test_set = gdata.split(dataset, seed=args.seed)
    for name, part in (("train", train_set), ("valid", valid_set), ("test", test_set)):
        gdata.save_graph_dataset(part, out / f"{name}.jsonl")

    planted = [sum(1 for r in records if c in r["planted"]) for c in range(spec.num_classes)]
    positive = [sum(1 for r in records if c in r["positive"]) for c in range(spec.num_classes)]
    manifest = {
        "n": args.n,
        "seed": args.seed,
        "sizes": {"train": len(train_set), "valid": len(valid_set), "test": len(test_set)},
        "classes": [{"class": c, "planted": planted[c], "positive": positive[c],
                     "chance_positives": positive[c] - planted[c]}
                    for c in range(spec.num_classes)],
        "motif_sizes": [m.size for m in spec.motifs],
        "motif_radii": [m.radius for m in spec.motifs],
        "stats": gdata.dataset_stats(dataset),
        "spec": gdata.motif_spec_to_dict(spec),
    }
    _dump_json(manifest, out / "manifest.json")
    print(f"wrote {len(dataset)} graphs to {out} "
          f"(train/valid/test = {len(train_set)}/{len(valid_set)}/{len(test_set)})")
    return 0


def cmd_train(args) -> int:
    cfg = load_run_config(args.config, {
        "seed": args.seed, "out": args.out, "threads": args.threads,
        "attention": args.attention, "factors": args.factors,
        "label_graph": args.label_graph, "label_threshold": args.label_threshold,
    })
    out = _out_dir(cfg)
    model_config, train_cfg = _build_configs(cfg)
    data_cfg = cfg.get("data", {})
    kind = data_cfg.get("kind", "graph")
    train_set = _attach_label_graph(_load_dataset(data_cfg["train"], kind), data_cfg)
    valid_set = _load_dataset(data_cfg["valid"], kind)
    valid_set.label_graph = train_set.label_graph
    if model_config.use_label_graph and train_set.label_graph is None:
        train_set.label_graph = gdata.LabelGraph(train_set.num_labels)
        valid_set.label_graph = train_set.label_graph

    effective = dict(cfg)
    effective["model"] = config_to_dict(model_config)
    _dump_json(effective, out / "effective_config.json")

    history_path = out / "history.jsonl"
    with open(history_path, "w", encoding="utf8") as handle:
        result = train(train_set, valid_set, model_config, train_cfg,
                       threads=int(cfg.get("threads", 1)),
                       log=lambda entry: (handle.write(json.dumps(entry) + "\n"),
                                          handle.flush()))

    save_checkpoint(result.params, model_config, out / "checkpoint.json",
                    optimizer=result.optimizer)
    report.history_to_csv(result.history, out / "history.csv")
    report.save_history_figure(result.history, out / "learning_curve.png")
    last = result.history[-1]
    print(f"trained {last['epoch']} epochs; best valid loss "
          f"{result.best_valid_loss:.6f} at epoch {result.best_epoch}; "
          f"outputs in {out}")
    return 0


def _scores_for(args, threshold):
    params, model_config, _ = load_checkpoint(args.checkpoint)
    kind = model_config.input_kind
    dataset = _load_dataset(args.data, kind)
    if args.label_graph:
        dataset.label_graph = gdata.load_label_graph(
            args.label_graph, dataset.num_labels, args.label_threshold)
    elif model_config.use_label_graph:
        dataset.label_graph = gdata.LabelGraph(dataset.num_labels)
    scores = evaluate_scores(dataset, params, model_config)
    truths = np.stack([ex.labels for ex in dataset.examples])
    return params, model_config, dataset, PredictionSet(scores, truths, threshold)


def cmd_eval(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _, _, _, preds = _scores_for(args, args.threshold)
    rep = metrics_report(preds)
    rows = per_label_rows(preds)
    _dump_json(rep, out / "metrics.json")
    report.per_label_to_csv(rows, out / "per_label.csv")
    report.save_metrics_figure(rep, rows, out / "metrics.png")
    print(json.dumps(rep, sort_keys=True))
    return 0


def cmd_predict(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _, _, dataset, preds = _scores_for(args, args.threshold)
    with open(out / "predictions.csv", "w", encoding="utf8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["example", "label", "score", "decision"])
        dec = preds.decisions()
        for k in range(len(dataset)):
            for c in range(dataset.num_labels):
                writer.writerow([k, c, preds.scores[k, c], int(dec[k, c])])
    print(f"wrote scores for {len(dataset)} examples to {out / 'predictions.csv'}")
    return 0


def cmd_explain(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params, model_config, _ = load_checkpoint(args.checkpoint)
    if model_config.attention not in ("pairwise", "hierarchical"):
        raise ConfigError("explain needs a pairwise or hierarchical attention model")
    dataset = _load_dataset(args.data, model_config.input_kind)
    if args.label_graph:
        dataset.label_graph = gdata.load_label_graph(
            args.label_graph, dataset.num_labels, args.label_threshold)
    elif model_config.use_label_graph:
        dataset.label_graph = gdata.LabelGraph(dataset.num_labels)
    graph_ids = [int(v) for v in args.graphs.split(",")] if args.graphs else list(range(len(dataset)))
    for gid in graph_ids:
        if not 0 <= gid < len(dataset):
            raise ConfigError(f"graph id {gid} out of range for {len(dataset)} examples")
        graph = dataset[gid].input
        _, trace = predict_scores(graph, params, model_config,
                                  label_graph=dataset.label_graph, want_trace=True)
        export_trace(trace, graph, out / f"trace_{gid}.json", graph_id=gid)
        summary = {"graph_id": gid, "layers": []}
        for t in range(len(trace.layers)):
            per_label = []
            for c in range(trace.num_labels):
                top = top_k_nodes(trace, c, t, min(args.k, trace.num_nodes))
                per_label.append({
                    "label": c,
                    "top": [{"node": node, "prob": prob,
                             "neighborhood": rooted_subgraph(graph, node, t + 1).node_ids}
                            for node, prob in top],
                })
            summary["layers"].append({"t": t + 1, "labels": per_label})
        _dump_json(summary, out / f"topk_{gid}.json")
    print(f"wrote traces for {len(graph_ids)} graphs to {out}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_common(parser):
    parser.add_argument("--seed", type=int, default=None, help="run seed (mandatory)")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--threads", type=int, default=None,
                        help="parallel tapes per batch (default 1, bit-exact)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="labelgraph",
        description="Multilabel graph classification with label nodes in the graph")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a planted-motif dataset")
    p.add_argument("--spec", required=True, help="motif spec JSON file")
    p.add_argument("--n", type=int, required=True, help="number of graphs")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("--config", required=True, help="run config JSON file")
    _add_common(p)
    p.add_argument("--attention", choices=["pairwise", "hierarchical"], default=None)
    p.add_argument("--factors", type=int, default=None, help="attention factors K")
    p.add_argument("--label-graph", dest="label_graph", default=None)
    p.add_argument("--label-threshold", dest="label_threshold", type=float, default=None)
    p.set_defaults(func=cmd_train)

    for name, func, help_text in (("eval", cmd_eval, "evaluate a checkpoint"),
                                  ("predict", cmd_predict, "write per-example scores")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--data", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--threshold", type=float, default=0.5,
                       help="decision threshold for F1")
        p.add_argument("--label-graph", dest="label_graph", default=None)
        p.add_argument("--label-threshold", dest="label_threshold", type=float, default=0.5)
        p.set_defaults(func=func)

    p = sub.add_parser("explain", help="export attention traces and top-k nodes")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--graphs", default=None, help="comma-separated example ids (default: all)")
    p.add_argument("--k", type=int, default=3, help="top-k nodes per label and layer")
    p.add_argument("--label-graph", dest="label_graph", default=None)
    p.add_argument("--label-threshold", dest="label_threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_explain)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Error as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
