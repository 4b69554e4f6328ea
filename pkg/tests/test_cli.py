"""End-to-end command line behavior on a small synthetic run."""

import csv
import json

import numpy as np
import pytest

from labelgraph import data as gdata
from labelgraph.cli import main
from labelgraph.data import demo_motif_spec, motif_spec_to_dict
from labelgraph.errors import ConfigError
from labelgraph.explain import load_trace
from labelgraph.metrics import PredictionSet, metrics_report


def write_spec(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(motif_spec_to_dict(demo_motif_spec())))
    return path


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def generated(tmp_path_factory):
    tmp_path = tmp_path_factory.mktemp("gen")
    spec = write_spec(tmp_path)
    out = tmp_path / "data"
    assert run("generate", "--spec", spec, "--n", 40, "--seed", 11, "--out", out) == 0
    return out


@pytest.fixture(scope="module")
def trained(generated, tmp_path_factory):
    tmp_path = tmp_path_factory.mktemp("train")
    config = {
        "seed": 5,
        "out": str(tmp_path / "run"),
        "data": {"train": str(generated / "train.jsonl"),
                 "valid": str(generated / "valid.jsonl")},
        "model": {"state_width": 6, "label_width": 5, "attention_width": 4,
                  "layers": 2},
        "train": {"batch_size": 8, "max_epochs": 3},
    }
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(config))
    assert run("train", "--config", cfg_path) == 0
    return tmp_path / "run"


def test_generate_is_byte_deterministic(tmp_path):
    spec = write_spec(tmp_path)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run("generate", "--spec", spec, "--n", 30, "--seed", 3, "--out", out1) == 0
    assert run("generate", "--spec", spec, "--n", 30, "--seed", 3, "--out", out2) == 0
    for name in ("train.jsonl", "valid.jsonl", "test.jsonl", "manifest.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_generate_manifest_accounts_for_every_graph(generated):
    manifest = json.loads((generated / "manifest.json").read_text())
    assert sum(manifest["sizes"].values()) == manifest["n"] == 40
    for entry in manifest["classes"]:
        assert entry["positive"] == entry["planted"] + entry["chance_positives"]
        assert entry["chance_positives"] >= 0


def test_generate_positive_rates_within_binomial_bound(tmp_path):
    spec = write_spec(tmp_path)
    out = tmp_path / "big"
    assert run("generate", "--spec", spec, "--n", 400, "--seed", 17, "--out", out) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    n = manifest["n"]
    sigma = np.sqrt(n * 0.5 * 0.5)
    for entry in manifest["classes"]:
        expected = n * 0.5 + entry["chance_positives"]
        assert abs(entry["positive"] - expected) <= 3 * sigma


def test_train_outputs(trained):
    for name in ("checkpoint.json", "history.jsonl", "history.csv",
                 "learning_curve.png", "effective_config.json"):
        assert (trained / name).exists(), name
    history = [json.loads(line) for line in
               (trained / "history.jsonl").read_text().splitlines()]
    assert [h["epoch"] for h in history] == [1, 2, 3]
    with open(trained / "history.csv") as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == 3
    assert float(rows[0]["train_loss"]) == history[0]["train_loss"]


def test_effective_config_echoed(trained):
    effective = json.loads((trained / "effective_config.json").read_text())
    assert effective["seed"] == 5
    assert effective["model"]["layers"] == 2
    assert effective["model"]["attention"] == "pairwise"


def test_eval_outputs_match_metrics_module(trained, generated, tmp_path):
    out = tmp_path / "eval"
    assert run("eval", "--checkpoint", trained / "checkpoint.json",
               "--data", generated / "test.jsonl", "--out", out) == 0
    report = json.loads((out / "metrics.json").read_text())
    assert (out / "per_label.csv").exists()
    assert (out / "metrics.png").exists()

    # self-consistency: recompute from the same checkpoint and data
    from labelgraph.training import evaluate_scores, load_checkpoint
    params, model_config, _ = load_checkpoint(trained / "checkpoint.json")
    dataset = gdata.load_graph_dataset(generated / "test.jsonl")
    scores = evaluate_scores(dataset, params, model_config)
    truths = np.stack([ex.labels for ex in dataset.examples])
    expected = metrics_report(PredictionSet(scores, truths))
    assert report == json.loads(json.dumps(expected))


def test_eval_shuffled_data_same_metrics(trained, generated, tmp_path):
    original = generated / "test.jsonl"
    lines = original.read_text().splitlines()
    shuffled = tmp_path / "shuffled.jsonl"
    shuffled.write_text("\n".join([lines[0]] + lines[:0:-1]) + "\n")
    out1, out2 = tmp_path / "e1", tmp_path / "e2"
    assert run("eval", "--checkpoint", trained / "checkpoint.json",
               "--data", original, "--out", out1) == 0
    assert run("eval", "--checkpoint", trained / "checkpoint.json",
               "--data", shuffled, "--out", out2) == 0
    a = json.loads((out1 / "metrics.json").read_text())
    b = json.loads((out2 / "metrics.json").read_text())
    assert a == b


def test_predict_writes_scores(trained, generated, tmp_path):
    out = tmp_path / "pred"
    assert run("predict", "--checkpoint", trained / "checkpoint.json",
               "--data", generated / "test.jsonl", "--out", out) == 0
    with open(out / "predictions.csv") as handle:
        rows = list(csv.DictReader(handle))
    dataset = gdata.load_graph_dataset(generated / "test.jsonl")
    assert len(rows) == len(dataset) * dataset.num_labels
    for row in rows[:5]:
        assert 0.0 < float(row["score"]) < 1.0


def test_explain_outputs_and_topk_consistency(trained, generated, tmp_path):
    out = tmp_path / "explain"
    assert run("explain", "--checkpoint", trained / "checkpoint.json",
               "--data", generated / "test.jsonl", "--out", out,
               "--graphs", "0,2", "--k", 2) == 0
    for gid in (0, 2):
        doc = load_trace(out / f"trace_{gid}.json")
        topk = json.loads((out / f"topk_{gid}.json").read_text())
        assert doc["graph_id"] == gid
        for layer_summary, layer in zip(topk["layers"], doc["layers"]):
            for label_entry in layer_summary["labels"]:
                probs = layer["probs"][label_entry["label"]]
                best = max(range(len(probs)), key=lambda i: (probs[i], -i))
                assert label_entry["top"][0]["node"] == best
                assert label_entry["top"][0]["prob"] == pytest.approx(probs[best])


def test_explain_repeated_invocation_identical(trained, generated, tmp_path):
    out1, out2 = tmp_path / "x1", tmp_path / "x2"
    for out in (out1, out2):
        assert run("explain", "--checkpoint", trained / "checkpoint.json",
                   "--data", generated / "test.jsonl", "--out", out,
                   "--graphs", "1", "--k", 3) == 0
    assert (out1 / "trace_1.json").read_bytes() == (out2 / "trace_1.json").read_bytes()
    assert (out1 / "topk_1.json").read_bytes() == (out2 / "topk_1.json").read_bytes()


def test_unknown_config_key_rejected(tmp_path, generated, capsys):
    config = {"seed": 1, "out": str(tmp_path / "run"), "lerning_rate": 0.1,
              "data": {"train": str(generated / "train.jsonl"),
                       "valid": str(generated / "valid.jsonl")}}
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps(config))
    assert run("train", "--config", cfg) == 1
    err = json.loads(capsys.readouterr().err)
    assert "lerning_rate" in err["message"]


def test_missing_seed_rejected(tmp_path, generated, capsys):
    config = {"out": str(tmp_path / "run"),
              "data": {"train": str(generated / "train.jsonl"),
                       "valid": str(generated / "valid.jsonl")}}
    cfg = tmp_path / "noseed.json"
    cfg.write_text(json.dumps(config))
    assert run("train", "--config", cfg) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ConfigError"


def test_flags_override_config(tmp_path, generated):
    config = {
        "seed": 2, "out": str(tmp_path / "runA"),
        "data": {"train": str(generated / "train.jsonl"),
                 "valid": str(generated / "valid.jsonl")},
        "model": {"state_width": 5, "label_width": 4, "attention_width": 3,
                  "layers": 1},
        "train": {"batch_size": 8, "max_epochs": 1},
    }
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(config))
    assert run("train", "--config", cfg, "--out", tmp_path / "runB",
               "--attention", "hierarchical", "--factors", 2) == 0
    effective = json.loads((tmp_path / "runB" / "effective_config.json").read_text())
    assert effective["model"]["attention"] == "hierarchical"
    assert effective["model"]["factors"] == 2
    assert not (tmp_path / "runA").exists()


def test_grid_hyperparameter_values_accepted():
    """The documented search grid must pass config validation."""
    from labelgraph.model import ModelConfig
    for layers in (2, 4, 6, 8, 10):
        for factors in (1, 5, 10, 15, 20):
            for label_width in (10, 30, 50, 70, 100):
                ModelConfig(layers=layers, factors=factors,
                            label_width=label_width,
                            attention="hierarchical").validate()


def test_batch_sizes_from_protocol_accepted():
    from labelgraph.training import TrainConfig
    TrainConfig(batch_size=60).validate()
    TrainConfig(batch_size=100).validate()
