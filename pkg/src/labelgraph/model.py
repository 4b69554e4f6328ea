"""Forward pass of the joint label-input message passing network.

Each class is an auxiliary node alongside the input graph's nodes. Every
step, input nodes mean-pool transformed neighbor states per edge type and
receive an attention-weighted mix of label states, while label nodes
receive an attention-weighted mix of input states (plus mean-pooled
dependency messages when a label graph is active); both sides then pass
their state and message through a gated highway update. All parameters are
shared across steps, and every step's messages are computed from the
previous step's states before either side is overwritten.

The attention score matrix is computed once per step and reused for both
directions: normalizing each input node's row over the classes weights the
label-to-input mix, and normalizing each class's column over the input
nodes weights the input-to-label mix. Hierarchical attention replaces the
full score matrix with two small ones against K learned factor vectors,
dropping the per-step score count from |V|*C to (|V|+C)*K.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from . import tensor as tz
from .data import AttributedGraph, DatasetMeta, LabelGraph, reject_unknown_keys
from .errors import ConfigError, ValidationError
from .seeding import substream

ATTENTION_MODES = ("pairwise", "hierarchical", "label_to_input_only", "none")


@dataclass
class ModelConfig:
    state_width: int = 24        # input-node state size
    label_width: int = 16        # label-node state size
    attention_width: int = 16    # hidden size of the score function / factor vectors
    layers: int = 4              # message passing steps (parameters shared across steps)
    attention: str = "pairwise"
    factors: int = 5             # intermediate attention factors, hierarchical mode only
    dropout: float = 0.3         # input-node dropout at step 0, training only
    readout_hidden: int = 16
    use_label_graph: bool = False
    input_kind: str = "graph"

    def validate(self) -> "ModelConfig":
        if self.layers < 1:
            raise ConfigError(f"layers must be >= 1, got {self.layers}")
        if self.attention not in ATTENTION_MODES:
            raise ConfigError(f"attention must be one of {ATTENTION_MODES}, got {self.attention!r}")
        if self.attention == "hierarchical" and self.factors < 1:
            raise ConfigError(f"factors must be >= 1, got {self.factors}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.input_kind not in ("graph", "vector"):
            raise ConfigError(f"input_kind must be 'graph' or 'vector', got {self.input_kind!r}")
        if self.input_kind == "vector" and self.use_label_graph:
            raise ConfigError("label graph messages are only defined for graph inputs")
        if min(self.state_width, self.label_width, self.attention_width,
               self.readout_hidden) < 1:
            raise ConfigError("all widths must be >= 1")
        return self

    def bidirectional(self) -> bool:
        return self.attention in ("pairwise", "hierarchical")

    def input_message_width(self) -> int:
        if self.input_kind == "vector":
            return self.label_width
        if self.bidirectional():
            return self.state_width + self.label_width
        return self.state_width

    def label_message_width(self) -> int:
        if self.input_kind == "vector":
            return self.label_width
        width = self.state_width
        if self.use_label_graph:
            width += self.label_width
        return width


class ModelParams:
    """Named float64 parameter arrays in a fixed, documented order."""

    def __init__(self, arrays: dict, meta: DatasetMeta):
        self.arrays = dict(arrays)
        self.meta = meta

    def __getitem__(self, name):
        return self.arrays[name]

    def __contains__(self, name):
        return name in self.arrays

    def names(self):
        return list(self.arrays)

    def items(self):
        return self.arrays.items()

    def clone(self) -> "ModelParams":
        return ModelParams({k: v.copy() for k, v in self.arrays.items()}, self.meta)

    def size(self) -> int:
        return sum(v.size for v in self.arrays.values())


def param_layout(config: ModelConfig, meta: DatasetMeta) -> list:
    """(name, shape) pairs in creation order; the single source of truth for
    initialization and checkpoint shape verification.

    All weight matrices act by right multiplication: an array of shape
    (in, out) maps row vectors of width `in` to width `out`.
    """
    config.validate()
    dx, dl, dz = config.state_width, config.label_width, config.attention_width
    layout = [("label_embed", (meta.num_labels, dl))]
    if config.input_kind == "graph":
        layout.append(("node_embed", (meta.num_node_types, dx)))
        if meta.feature_width:
            layout.append(("feature_proj", (meta.feature_width, dx)))
        for e in range(meta.num_edge_types):
            layout.append((f"edge_w.{e}", (dx, dx)))
    else:
        layout.append(("input_proj_w", (meta.feature_width, dx)))
        layout.append(("input_proj_b", (dx,)))
        layout.append(("label_proj", (dx, dl)))
    if config.use_label_graph:
        for e in range(max(1, meta.num_label_edge_types)):
            layout.append((f"label_edge_w.{e}", (dl, dl)))
    if config.attention in ("pairwise", "label_to_input_only"):
        layout += [("score_w_input", (dx, dz)), ("score_w_label", (dl, dz)),
                   ("score_bias", (dz,)), ("score_u", (dz,))]
    elif config.attention == "hierarchical":
        layout += [("factor_vecs", (config.factors, dz)),
                   ("factor_w_input", (dx, dz)), ("factor_w_label", (dl, dz)),
                   ("factor_u_input", (dz,)), ("factor_u_label", (dz,))]
    w_in, w_lab = config.input_message_width(), config.label_message_width()
    layout += [
        ("in_gate_w", (dx, dx)), ("in_gate_u", (w_in, dx)), ("in_gate_b", (dx,)),
        ("in_cand_w", (dx, dx)), ("in_cand_u", (w_in, dx)), ("in_cand_b", (dx,)),
        ("lab_gate_w", (dl, dl)), ("lab_gate_u", (w_lab, dl)), ("lab_gate_b", (dl,)),
        ("lab_cand_w", (dl, dl)), ("lab_cand_u", (w_lab, dl)), ("lab_cand_b", (dl,)),
        ("readout_w1", (dl, config.readout_hidden)), ("readout_b1", (config.readout_hidden,)),
        ("readout_w2", (config.readout_hidden, 1)), ("readout_b2", (1,)),
    ]
    return layout


def init_params(config: ModelConfig, meta: DatasetMeta, seed: int) -> ModelParams:
    """Uniform(-b, b) with b = sqrt(6 / (fan_in + fan_out)); biases zero."""
    rng = substream(seed, "init")
    arrays = {}
    for name, shape in param_layout(config, meta):
        if name.endswith("_b") or name.endswith("_bias") or name.endswith("b1") or name.endswith("b2"):
            arrays[name] = np.zeros(shape)
            continue
        if len(shape) == 2:
            bound = math.sqrt(6.0 / (shape[0] + shape[1]))
        else:
            bound = math.sqrt(6.0 / (shape[0] + 1))
        arrays[name] = rng.uniform(-bound, bound, size=shape)
    return ModelParams(arrays, meta)


@dataclass
class AttentionTrace:
    """Per-step attention probabilities for explanation export.

    `label_to_input` rows (one per class, over input nodes) always sum to 1;
    in hierarchical mode they are the composite product of the two factor
    softmaxes on the path that writes the label states.
    """
    num_labels: int
    num_nodes: int
    layers: list = field(default_factory=list)

    def record(self, label_to_input, input_to_label=None, factors=None):
        self.layers.append({
            "label_to_input": np.asarray(label_to_input),
            "input_to_label": None if input_to_label is None else np.asarray(input_to_label),
            "factors": factors,
        })


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------

def embed(graph: AttributedGraph, tape: tz.Tape, params: ModelParams,
          config: ModelConfig, training: bool = False, rng=None):
    """Step-0 states: node-type embeddings (plus projected features when
    present) for inputs, label embedding rows for labels. Inverted dropout
    hits input rows only, and only in training."""
    meta = params.meta
    for t in graph.node_types:
        if not 0 <= t < meta.num_node_types:
            raise ValidationError(f"node type {t} out of range for {meta.num_node_types} types")
    emb = tape.param("node_embed", params["node_embed"])
    x = tz.gather_rows(emb, graph.node_types)
    if graph.node_features is not None and "feature_proj" in params:
        proj = tape.param("feature_proj", params["feature_proj"])
        x = tz.add(x, tz.matmul(tape.const(graph.node_features), proj))
    if training and config.dropout > 0.0:
        if rng is None:
            raise ConfigError("training-mode embed needs an rng for dropout")
        keep = 1.0 - config.dropout
        mask = (rng.random(x.shape) < keep) / keep
        x = tz.mul(x, tape.const(mask))
    labels = tape.param("label_embed", params["label_embed"])
    return x, labels


def neighbor_pool(x: tz.Tensor, graph: AttributedGraph, tape: tz.Tape,
                  params: ModelParams) -> tz.Tensor:
    """mu_i = mean over neighbors j of x_j W_{type(i,j)}; isolated nodes get
    a zero row."""
    mats = graph.averaging_matrices(params.meta.num_edge_types)
    total = None
    for e, mat in enumerate(mats):
        if not mat.any():
            continue
        w = tape.param(f"edge_w.{e}", params[f"edge_w.{e}"])
        term = tz.matmul(tape.const(mat), tz.matmul(x, w))
        total = term if total is None else tz.add(total, term)
    if total is None:
        total = tape.const(np.zeros((graph.num_nodes, x.shape[1])))
    return total


def label_graph_pool(labels: tz.Tensor, label_graph: LabelGraph | None,
                     tape: tz.Tape, params: ModelParams, num_labels: int,
                     width: int) -> tz.Tensor:
    """Mean-pooled messages along directed label dependency edges; classes
    with no incoming edges (or no label graph at all) get zeros."""
    if label_graph is None or not label_graph.edges:
        return tape.const(np.zeros((num_labels, width)))
    total = None
    for e, mat in enumerate(label_graph.averaging_matrices()):
        if not mat.any():
            continue
        w = tape.param(f"label_edge_w.{e}", params[f"label_edge_w.{e}"])
        term = tz.matmul(tape.const(mat), tz.matmul(labels, w))
        total = term if total is None else tz.add(total, term)
    if total is None:
        return tape.const(np.zeros((num_labels, width)))
    return total


def pairwise_scores(x: tz.Tensor, labels: tz.Tensor, tape: tz.Tape,
                    params: ModelParams) -> tz.Tensor:
    """S[i, c] = u . tanh(x_i W_in + l_c W_lab + bias); shared by both
    attention directions within a step."""
    return tz.pair_scores(
        x, labels,
        tape.param("score_w_input", params["score_w_input"]),
        tape.param("score_w_label", params["score_w_label"]),
        tape.param("score_bias", params["score_bias"]),
        tape.param("score_u", params["score_u"]),
    )


def input_to_label_message(scores: tz.Tensor, labels: tz.Tensor):
    """Each input node mixes label states with its score row normalized over
    classes. Returns the message matrix and the row-normalized weights."""
    weights = tz.softmax(scores, "rows")
    return tz.matmul(weights, labels), weights


def label_to_input_message(scores: tz.Tensor, x: tz.Tensor):
    """Each class mixes input states with its score column normalized over
    input nodes. Returns the message matrix and the per-class weights (rows
    sum to 1 over input nodes)."""
    weights = tz.transpose(tz.softmax(scores, "cols"))
    return tz.matmul(weights, x), weights


def hierarchical_messages(x: tz.Tensor, labels: tz.Tensor, tape: tz.Tape,
                          params: ModelParams, factors: int):
    """Two-stage attention through K factor vectors.

    Message to inputs:  m_i = sum_k a_ik * (sum_c b_ck l_c) where each input's
    a row sums to 1 over factors and each factor's b column sums to 1 over
    classes. Message to labels mirrors it with the roles swapped. Returns
    (input message, label message, composite weight matrices, factor softmaxes).
    """
    if factors < 1:
        raise ConfigError(f"factors must be >= 1, got {factors}")
    z = tape.param("factor_vecs", params["factor_vecs"])
    s1 = tz.pair_scores(x, z, tape.param("factor_w_input", params["factor_w_input"]),
                        None, None, tape.param("factor_u_input", params["factor_u_input"]))
    s2 = tz.pair_scores(labels, z, tape.param("factor_w_label", params["factor_w_label"]),
                        None, None, tape.param("factor_u_label", params["factor_u_label"]))
    input_over_factors = tz.softmax(s1, "rows")    # (V, K), rows sum to 1
    factor_over_inputs = tz.softmax(s1, "cols")    # (V, K), cols sum to 1
    label_over_factors = tz.softmax(s2, "rows")    # (C, K), rows sum to 1
    factor_over_labels = tz.softmax(s2, "cols")    # (C, K), cols sum to 1

    label_mix = tz.matmul(tz.transpose(factor_over_labels), labels)   # (K, label_width)
    m_input = tz.matmul(input_over_factors, label_mix)                # (V, label_width)
    input_mix = tz.matmul(tz.transpose(factor_over_inputs), x)        # (K, state_width)
    m_label = tz.matmul(label_over_factors, input_mix)                # (C, state_width)

    # composite probabilities for the trace; both products have rows summing
    # to 1 because each mixes one row-normalized and one column-normalized factor
    label_to_input = label_over_factors.value @ factor_over_inputs.value.T  # (C, V)
    input_to_label = input_over_factors.value @ factor_over_labels.value.T  # (V, C)
    softmaxes = {
        "input_over_factors": input_over_factors.value,
        "factor_over_inputs": factor_over_inputs.value,
        "label_over_factors": label_over_factors.value,
        "factor_over_labels": factor_over_labels.value,
    }
    return m_input, m_label, (label_to_input, input_to_label), softmaxes


def highway(prev: tz.Tensor, message: tz.Tensor, tape: tz.Tape,
            params: ModelParams, prefix: str, gate_override=None) -> tz.Tensor:
    """Gated update: next = (1 - gate) * prev + gate * relu candidate.

    `gate_override` replaces the learned gate with a constant; 0.0 gives the
    exact identity map, used by frozen-network tests.
    """
    p = lambda suffix: tape.param(f"{prefix}_{suffix}", params[f"{prefix}_{suffix}"])
    if gate_override is not None:
        cand = tz.relu(tz.add_bias(tz.add(tz.matmul(prev, p("cand_w")),
                                          tz.matmul(message, p("cand_u"))), p("cand_b")))
        return tz.add(prev, tz.scale(tz.sub(cand, prev), float(gate_override)))
    return tz.gated_update(prev, message, p("gate_w"), p("gate_u"), p("gate_b"),
                           p("cand_w"), p("cand_u"), p("cand_b"))


def readout(labels: tz.Tensor, tape: tz.Tape, params: ModelParams) -> tz.Tensor:
    """Per-class probability from the final label state; one shared two-layer
    network, sigmoid output clamped away from 0 and 1."""
    hidden = tz.relu(tz.add_bias(tz.matmul(labels, tape.param("readout_w1", params["readout_w1"])),
                                 tape.param("readout_b1", params["readout_b1"])))
    return tz.sigmoid(tz.add_bias(tz.matmul(hidden, tape.param("readout_w2", params["readout_w2"])),
                                  tape.param("readout_b2", params["readout_b2"])))


# ---------------------------------------------------------------------------
# full forward passes
# ---------------------------------------------------------------------------

def _attention_step(x, labels, tape, params, config, counters, trace):
    """Messages for one step; returns (message to inputs or None, message to
    labels or None)."""
    num_nodes, num_labels = x.shape[0], labels.shape[0]
    mode = config.attention
    if mode == "none":
        return None, None
    if mode == "hierarchical":
        m_input, m_label, (l2i, i2l), softmaxes = hierarchical_messages(
            x, labels, tape, params, config.factors)
        if counters is not None:
            counters["score_entries"] = counters.get("score_entries", 0) + \
                num_nodes * config.factors + num_labels * config.factors
        if trace is not None:
            trace.record(l2i, i2l, softmaxes)
        return m_input, m_label
    scores = pairwise_scores(x, labels, tape, params)
    if counters is not None:
        counters["score_entries"] = counters.get("score_entries", 0) + num_nodes * num_labels
    m_label, l2i_weights = label_to_input_message(scores, x)
    if mode == "label_to_input_only":
        if trace is not None:
            trace.record(l2i_weights.value)
        return None, m_label
    m_input, i2l_weights = input_to_label_message(scores, labels)
    if trace is not None:
        trace.record(l2i_weights.value, i2l_weights.value)
    return m_input, m_label


def forward(graph: AttributedGraph, params: ModelParams, config: ModelConfig,
            *, training: bool = False, rng=None, tape: tz.Tape | None = None,
            label_graph: LabelGraph | None = None, want_trace: bool = False,
            counters=None, gate_override=None):
    """Run all message passing steps; returns (final label states, trace).

    All of one step's messages are computed from the previous step's states
    before X or L is replaced, so the update order cannot matter.
    """
    config.validate()
    tape = tape or tz.Tape()
    if config.input_kind == "vector":
        return _forward_vector_graph(graph, params, config, tape, training, rng,
                                     want_trace, counters, gate_override)
    x, labels = embed(graph, tape, params, config, training, rng)
    trace = AttentionTrace(labels.shape[0], graph.num_nodes) if want_trace else None
    zeros_label_msg = None
    for _ in range(config.layers):
        mu = neighbor_pool(x, graph, tape, params)
        m_input, m_label = _attention_step(x, labels, tape, params, config,
                                           counters, trace)
        input_msg = tz.concat(mu, m_input) if m_input is not None else mu
        if m_label is None:
            if zeros_label_msg is None:
                zeros_label_msg = tape.const(np.zeros((labels.shape[0], config.state_width)))
            m_label = zeros_label_msg
        label_msg = m_label
        if config.use_label_graph:
            pooled = label_graph_pool(labels, label_graph, tape, params,
                                      labels.shape[0], config.label_width)
            label_msg = tz.concat(m_label, pooled)
        new_x = highway(x, input_msg, tape, params, "in", gate_override)
        new_labels = highway(labels, label_msg, tape, params, "lab", gate_override)
        x, labels = new_x, new_labels
    return labels, trace


def _project_vector(features, tape, params):
    f = tape.const(np.asarray(features, dtype=np.float64).reshape(1, -1))
    return tz.relu(tz.add_bias(tz.matmul(f, tape.param("input_proj_w", params["input_proj_w"])),
                               tape.param("input_proj_b", params["input_proj_b"])))


def _vector_label_message(x, tape, params, num_labels):
    proj = tz.matmul(x, tape.param("label_proj", params["label_proj"]))  # (1, label_width)
    return tz.matmul(tape.const(np.ones((num_labels, 1))), proj)


def _forward_vector_graph(graph, params, config, tape, training, rng,
                          want_trace, counters, gate_override):
    """Vector-mode forward over the equivalent singleton graph: the matrix
    machinery collapses to one input node with no neighbors."""
    if graph.num_nodes != 1 or graph.edges:
        raise ConfigError("vector-mode forward needs a singleton graph with no edges")
    if graph.node_features is None:
        raise ConfigError("vector-mode forward needs node features")
    x = _project_vector(graph.node_features[0], tape, params)
    if training and config.dropout > 0.0:
        if rng is None:
            raise ConfigError("training-mode forward needs an rng for dropout")
        keep = 1.0 - config.dropout
        x = tz.mul(x, tape.const((rng.random(x.shape) < keep) / keep))
    labels = tape.param("label_embed", params["label_embed"])
    trace = AttentionTrace(labels.shape[0], 1) if want_trace else None
    for _ in range(config.layers):
        m_input, _ = _attention_step(x, labels, tape, params, config, counters, trace)
        if m_input is None:
            m_input = tape.const(np.zeros((1, config.label_width)))
        label_msg = _vector_label_message(x, tape, params, labels.shape[0])
        new_x = highway(x, m_input, tape, params, "in", gate_override)
        new_labels = highway(labels, label_msg, tape, params, "lab", gate_override)
        x, labels = new_x, new_labels
    return labels, trace


def forward_vector(features, params: ModelParams, config: ModelConfig,
                   *, training: bool = False, rng=None,
                   tape: tz.Tape | None = None, gate_override=None) -> tz.Tensor:
    """Vector-input forward written directly over the single state row; must
    agree with `forward` on the equivalent singleton graph."""
    config.validate()
    if config.input_kind != "vector":
        raise ConfigError("forward_vector needs input_kind == 'vector'")
    tape = tape or tz.Tape()
    x = _project_vector(features, tape, params)
    if training and config.dropout > 0.0:
        if rng is None:
            raise ConfigError("training-mode forward_vector needs an rng for dropout")
        keep = 1.0 - config.dropout
        x = tz.mul(x, tape.const((rng.random(x.shape) < keep) / keep))
    labels = tape.param("label_embed", params["label_embed"])
    num_labels = labels.shape[0]
    for _ in range(config.layers):
        if config.attention == "none":
            m_input = tape.const(np.zeros((1, config.label_width)))
        elif config.attention == "label_to_input_only":
            # the dropped direction is the one feeding the input node
            m_input = tape.const(np.zeros((1, config.label_width)))
        elif config.attention == "hierarchical":
            m_input, _, _, _ = hierarchical_messages(x, labels, tape, params, config.factors)
        else:
            scores = pairwise_scores(x, labels, tape, params)
            m_input, _ = input_to_label_message(scores, labels)
        label_msg = _vector_label_message(x, tape, params, num_labels)
        new_x = highway(x, m_input, tape, params, "in", gate_override)
        new_labels = highway(labels, label_msg, tape, params, "lab", gate_override)
        x, labels = new_x, new_labels
    return labels


def predict_scores(example_input, params: ModelParams, config: ModelConfig,
                   *, label_graph: LabelGraph | None = None,
                   want_trace: bool = False):
    """Class probabilities for one example (graph or feature vector); returns
    (scores as a length-C array, trace or None)."""
    tape = tz.Tape()
    if config.input_kind == "graph":
        labels, trace = forward(example_input, params, config, tape=tape,
                                label_graph=label_graph, want_trace=want_trace)
    else:
        if isinstance(example_input, AttributedGraph):
            labels, trace = forward(example_input, params, config, tape=tape,
                                    want_trace=want_trace)
        else:
            labels = forward_vector(example_input, params, config, tape=tape)
            trace = None
    out = readout(labels, tape, params)
    return out.value.reshape(-1).copy(), trace


def config_to_dict(config: ModelConfig) -> dict:
    return asdict(config)


def config_from_dict(d: dict) -> ModelConfig:
    reject_unknown_keys(d, set(ModelConfig.__dataclass_fields__), "model config")
    return ModelConfig(**d).validate()
