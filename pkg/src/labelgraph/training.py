"""Binary cross-entropy training with Adam and a plateau learning-rate schedule.

An epoch is one full shuffled pass over the training set. Each example runs
forward and backward on its own tape; per-example gradient maps are merged
by summation and divided by the batch size, so the batch loss is the mean
over examples and gradient scale does not depend on batch size. After every
epoch the validation loss drives the schedule: when it fails to improve for
`patience` consecutive epochs the learning rate halves and the plateau
reference resets, and training stops once a fifth decay would trigger or
the epoch cap is reached. The returned parameters are the checkpoint with
the lowest validation loss seen.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import tensor as tz
from .data import MultilabelDataset, reject_unknown_keys
from .errors import (CheckpointError, ConfigError, ParseError, ShapeError,
                     TrainingError, ValidationError)
from .metrics import PredictionSet, auc, f1
from .model import (ModelConfig, ModelParams, config_from_dict, config_to_dict,
                    forward, forward_vector, init_params, param_layout,
                    predict_scores, readout)
from .seeding import substream

CHECKPOINT_VERSION = 1
PROB_EPS = 1e-12


@dataclass
class TrainConfig:
    batch_size: int = 60
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    patience: int = 20
    decay_factor: float = 0.5
    max_epochs: int = 300
    max_decays: int = 4
    seed: int = 0

    def validate(self) -> "TrainConfig":
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if not 0.0 < self.decay_factor < 1.0:
            raise ConfigError(f"decay_factor must be in (0, 1), got {self.decay_factor}")
        if self.batch_size < 1 or self.max_epochs < 1 or self.max_decays < 0:
            raise ConfigError("batch_size and max_epochs must be >= 1, max_decays >= 0")
        return self


def train_config_from_dict(d: dict) -> TrainConfig:
    reject_unknown_keys(d, set(TrainConfig.__dataclass_fields__), "train config")
    return TrainConfig(**d).validate()


# ---------------------------------------------------------------------------
# loss
# ---------------------------------------------------------------------------

def bce_loss(output: tz.Tensor, targets) -> tz.Tensor:
    """-sum_c [y_c log o_c + (1 - y_c) log(1 - o_c)] on the tape.

    `output` must already be clamped away from 0 and 1 (the sigmoid op
    guarantees that), `targets` is a 0/1 vector.
    """
    y = np.asarray(targets, dtype=np.float64).reshape(-1)
    if output.value.size != y.size:
        raise ShapeError(f"bce_loss: {output.value.size} outputs vs {y.size} targets")
    y = y.reshape(output.shape)
    tape = output.tape
    ones = tape.const(np.ones_like(y))
    pos = tz.mul(tape.const(y), tz.log(output))
    neg = tz.mul(tape.const(1.0 - y), tz.log(tz.sub(ones, output)))
    return tz.scale(tz.reduce(tz.add(pos, neg), "sum", "all"), -1.0)


def bce_value(scores, targets) -> float:
    """Plain numpy version of the same loss, for evaluation passes."""
    s = np.clip(np.asarray(scores, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
    y = np.asarray(targets, dtype=np.float64)
    if s.shape != y.shape:
        raise ShapeError(f"bce_value: shapes {s.shape} and {y.shape} differ")
    return float(-(y * np.log(s) + (1.0 - y) * np.log(1.0 - s)).sum())


# ---------------------------------------------------------------------------
# optimizer and schedule
# ---------------------------------------------------------------------------

@dataclass
class OptimizerState:
    moment1: dict
    moment2: dict
    step: int = 0
    lr: float = 0.001
    bad_epochs: int = 0
    decays: int = 0
    best_valid: float = math.inf

    @classmethod
    def fresh(cls, params: ModelParams, lr: float) -> "OptimizerState":
        return cls(moment1={k: np.zeros_like(v) for k, v in params.items()},
                   moment2={k: np.zeros_like(v) for k, v in params.items()},
                   lr=lr)


def adam_step(params: ModelParams, grads: dict, state: OptimizerState,
              config: TrainConfig) -> None:
    """One in-place Adam update with bias correction."""
    state.step += 1
    b1, b2, eps = config.beta1, config.beta2, config.epsilon
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name, value in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(value)
        if not np.isfinite(g).all():
            raise TrainingError(f"non-finite gradient for parameter {name!r}")
        m = state.moment1[name]
        v = state.moment2[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        value -= state.lr * (m / c1) / (np.sqrt(v / c2) + eps)


def lr_schedule_tick(state: OptimizerState, valid_loss: float,
                     config: TrainConfig, epoch: int) -> bool:
    """Advance the plateau schedule by one epoch; returns the stop flag.

    Improvement means strictly lower than the best loss seen since the last
    decay. After `patience` non-improving epochs the rate halves and the
    reference resets (so the next plateau is measured from scratch); the
    run stops when a decay beyond `max_decays` would trigger, or at the
    epoch cap.
    """
    if valid_loss < state.best_valid:
        state.best_valid = valid_loss
        state.bad_epochs = 0
    else:
        state.bad_epochs += 1
        if state.bad_epochs >= config.patience:
            if state.decays >= config.max_decays:
                return True
            state.lr *= config.decay_factor
            state.decays += 1
            state.bad_epochs = 0
            state.best_valid = math.inf
    return epoch >= config.max_epochs


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

def _example_loss(example, params, model_config, label_graph, training, rng):
    tape = tz.Tape()
    if model_config.input_kind == "graph":
        labels, _ = forward(example.input, params, model_config, training=training,
                            rng=rng, tape=tape, label_graph=label_graph)
    else:
        labels = forward_vector(example.input, params, model_config,
                                training=training, rng=rng, tape=tape)
    out = readout(labels, tape, params)
    loss = bce_loss(out, example.labels)
    grads = tz.backward(loss)
    return loss.item(), grads


def _merge_grads(grad_maps, batch_size):
    merged = {}
    for grads in grad_maps:
        for name, g in grads.items():
            if name in merged:
                merged[name] += g
            else:
                merged[name] = g.copy()
    for g in merged.values():
        g /= batch_size
    return merged


def evaluate_scores(dataset: MultilabelDataset, params: ModelParams,
                    config: ModelConfig) -> np.ndarray:
    """Score matrix (N, C) for a whole dataset, dropout off."""
    rows = [predict_scores(ex.input, params, config,
                           label_graph=dataset.label_graph)[0]
            for ex in dataset.examples]
    return np.stack(rows) if rows else np.zeros((0, dataset.num_labels))


def _valid_metrics(scores, truths):
    preds = PredictionSet(scores, truths)
    out = {"micro_f1": f1(preds, "micro"), "macro_f1": f1(preds, "macro")}
    for key, averaging in (("micro_auc", "micro"), ("macro_auc", "macro")):
        try:
            out[key] = auc(preds, averaging)
        except Exception:
            out[key] = None  # degenerate split: label has one class only
    return out


@dataclass
class TrainResult:
    params: ModelParams
    history: list
    best_epoch: int
    best_valid_loss: float
    optimizer: OptimizerState


def train(train_set: MultilabelDataset, valid_set: MultilabelDataset,
          model_config: ModelConfig, train_config: TrainConfig,
          params: ModelParams | None = None,
          optimizer: OptimizerState | None = None,
          threads: int = 1, log=None) -> TrainResult:
    model_config.validate()
    train_config.validate()
    if not len(train_set) or not len(valid_set):
        raise ValidationError("train and valid sets must be non-empty")
    if params is None:
        params = init_params(model_config, train_set.meta(), train_config.seed)
    if optimizer is None:
        optimizer = OptimizerState.fresh(params, train_config.learning_rate)

    shuffle_rng = substream(train_config.seed, "shuffle")
    dropout_rng = substream(train_config.seed, "dropout")
    label_graph = train_set.label_graph
    valid_truths = np.stack([ex.labels for ex in valid_set.examples])

    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    history = []
    best_params = params.clone()
    best_valid = math.inf
    best_epoch = 0
    try:
        for epoch in range(1, train_config.max_epochs + 1):
            order = shuffle_rng.permutation(len(train_set))
            epoch_loss = 0.0
            for start in range(0, len(order), train_config.batch_size):
                batch = [train_set.examples[i] for i in order[start:start + train_config.batch_size]]
                # one child generator per example: thread-safe, and the masks
                # do not depend on the thread count
                rngs = dropout_rng.spawn(len(batch))
                work = lambda pair: _example_loss(pair[0], params, model_config,
                                                  label_graph, True, pair[1])
                if pool is not None:
                    results = list(pool.map(work, zip(batch, rngs)))
                else:
                    results = [work(pair) for pair in zip(batch, rngs)]
                losses, grad_maps = zip(*results)
                epoch_loss += float(sum(losses))
                adam_step(params, _merge_grads(grad_maps, len(batch)), optimizer,
                          train_config)
            train_loss = epoch_loss / len(order)

            valid_scores = evaluate_scores(valid_set, params, model_config)
            valid_loss = float(np.mean([bce_value(s, t) for s, t in
                                        zip(valid_scores, valid_truths)]))
            entry = {"epoch": epoch, "lr": optimizer.lr,
                     "train_loss": train_loss, "valid_loss": valid_loss}
            entry.update({f"valid_{k}": v for k, v in
                          _valid_metrics(valid_scores, valid_truths).items()})
            history.append(entry)
            if log is not None:
                log(entry)

            if valid_loss < best_valid:
                best_valid = valid_loss
                best_params = params.clone()
                best_epoch = epoch
            if lr_schedule_tick(optimizer, valid_loss, train_config, epoch):
                break
    finally:
        if pool is not None:
            pool.shutdown()

    return TrainResult(best_params, history, best_epoch, best_valid, optimizer)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(params: ModelParams, config: ModelConfig, path,
                    optimizer: OptimizerState | None = None) -> None:
    """One JSON document: config, dataset meta, flat parameter arrays in
    layout order, optional optimizer state. JSON float round-tripping is
    exact, so save -> load is bit-identical."""
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "config": config_to_dict(config),
        "meta": asdict(params.meta),
        "params": [{"name": name, "shape": list(value.shape),
                    "data": value.reshape(-1).tolist()}
                   for name, value in params.items()],
    }
    if optimizer is not None:
        doc["optimizer"] = {
            "step": optimizer.step, "lr": optimizer.lr,
            "bad_epochs": optimizer.bad_epochs, "decays": optimizer.decays,
            "best_valid": None if math.isinf(optimizer.best_valid) else optimizer.best_valid,
            "moment1": {k: v.reshape(-1).tolist() for k, v in optimizer.moment1.items()},
            "moment2": {k: v.reshape(-1).tolist() for k, v in optimizer.moment2.items()},
        }
    with open(path, "w", encoding="utf8") as handle:
        json.dump(doc, handle)


def load_checkpoint(path):
    """Returns (params, model config, optimizer state or None)."""
    from .data import DatasetMeta

    try:
        with open(path, "r", encoding="utf8") as handle:
            doc = json.load(handle)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not a valid checkpoint: {exc.msg}") from exc
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise ParseError(f"{path}: not a valid checkpoint")
    if doc["format_version"] != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: format version {doc['format_version']} "
                              f"is not supported (expected {CHECKPOINT_VERSION})")
    config = config_from_dict(doc["config"])
    meta = DatasetMeta(**doc["meta"])
    expected = param_layout(config, meta)
    stored = {entry["name"]: entry for entry in doc["params"]}
    if set(stored) != {name for name, _ in expected}:
        raise ValidationError(f"{path}: parameter names do not match the config")
    arrays = {}
    for name, shape in expected:
        entry = stored[name]
        if tuple(entry["shape"]) != shape:
            raise ValidationError(f"{path}: parameter {name!r} has shape "
                                  f"{tuple(entry['shape'])}, expected {shape}")
        arrays[name] = np.asarray(entry["data"], dtype=np.float64).reshape(shape)
    params = ModelParams(arrays, meta)

    optimizer = None
    if doc.get("optimizer") is not None:
        raw = doc["optimizer"]
        optimizer = OptimizerState(
            moment1={k: np.asarray(v, dtype=np.float64).reshape(params[k].shape)
                     for k, v in raw["moment1"].items()},
            moment2={k: np.asarray(v, dtype=np.float64).reshape(params[k].shape)
                     for k, v in raw["moment2"].items()},
            step=int(raw["step"]), lr=float(raw["lr"]),
            bad_epochs=int(raw["bad_epochs"]), decays=int(raw["decays"]),
            best_valid=math.inf if raw["best_valid"] is None else float(raw["best_valid"]),
        )
    return params, config, optimizer
