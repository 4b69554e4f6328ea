"""Export and summarize per-step label-to-input attention.

A trace is exported as one JSON document per graph, with a companion CSV
(layer, label, node, prob) for spreadsheet use. In hierarchical mode the
exported per-label rows are the composite product of the two factor
softmaxes, because the per-factor matrices alone do not answer "which node
did this label attend to"; the raw factor softmaxes are stored alongside so
the composition is auditable.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import AttributedGraph
from .errors import DomainError, ValidationError
from .model import AttentionTrace

ROW_SUM_TOL = 1e-6


def export_trace(trace: AttentionTrace, graph: AttributedGraph, path,
                 graph_id: int = 0) -> dict:
    """Write the trace for one graph as JSON plus a companion CSV; returns
    the exported document."""
    if trace is None or not trace.layers:
        raise ValidationError("export_trace: empty trace")
    if trace.num_nodes != graph.num_nodes:
        raise ValidationError(f"export_trace: trace has {trace.num_nodes} nodes "
                              f"but the graph has {graph.num_nodes}")
    layers = []
    for t, layer in enumerate(trace.layers, start=1):
        probs = np.asarray(layer["label_to_input"])
        if probs.shape != (trace.num_labels, trace.num_nodes):
            raise ValidationError("export_trace: probability matrix shape mismatch")
        sums = probs.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > ROW_SUM_TOL):
            raise ValidationError("export_trace: a probability row does not sum to 1")
        entry = {"t": t, "probs": probs.tolist()}
        if layer.get("input_to_label") is not None:
            entry["input_to_label"] = np.asarray(layer["input_to_label"]).tolist()
        if layer.get("factors") is not None:
            entry["factors"] = {k: np.asarray(v).tolist()
                                for k, v in layer["factors"].items()}
        layers.append(entry)
    doc = {
        "graph_id": int(graph_id),
        "nodes": list(graph.node_types),
        "edges": [[i, j, e] for i, j, e in graph.edges],
        "layers": layers,
    }
    path = Path(path)
    with open(path, "w", encoding="utf8") as handle:
        json.dump(doc, handle)
    with open(path.with_suffix(".csv"), "w", encoding="utf8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["layer", "label", "node", "prob"])
        for entry in layers:
            for c, row in enumerate(entry["probs"]):
                for i, p in enumerate(row):
                    writer.writerow([entry["t"], c, i, p])
    return doc


def load_trace(path) -> dict:
    with open(path, "r", encoding="utf8") as handle:
        return json.load(handle)


def top_k_nodes(trace: AttentionTrace, label: int, layer: int, k: int) -> list:
    """Nodes a label attended to most at one layer, sorted by probability
    descending with ties broken by ascending node id. `layer` is 0-based."""
    if not 0 <= layer < len(trace.layers):
        raise DomainError(f"layer {layer} out of range for {len(trace.layers)} layers")
    if not 0 <= label < trace.num_labels:
        raise DomainError(f"label {label} out of range for {trace.num_labels} labels")
    if not 1 <= k <= trace.num_nodes:
        raise DomainError(f"k must be in [1, {trace.num_nodes}], got {k}")
    row = np.asarray(trace.layers[layer]["label_to_input"])[label]
    order = sorted(range(trace.num_nodes), key=lambda i: (-row[i], i))
    return [(i, float(row[i])) for i in order[:k]]


@dataclass
class RootedSubgraph:
    """Induced neighborhood around a root node, with original node ids kept."""
    graph: AttributedGraph
    node_ids: list       # original ids, position k in `graph` is node_ids[k]
    root: int            # index of the root inside `graph`


def rooted_subgraph(graph: AttributedGraph, root: int, radius: int) -> RootedSubgraph:
    """Induced subgraph on all nodes within breadth-first distance `radius`
    of `root`."""
    if not 0 <= root < graph.num_nodes:
        raise DomainError(f"root {root} out of range for {graph.num_nodes} nodes")
    if radius < 0:
        raise DomainError(f"radius must be >= 0, got {radius}")
    dist = {root: 0}
    frontier = [root]
    adj = graph.adjacency()
    while frontier:
        nxt = []
        for v in frontier:
            if dist[v] == radius:
                continue
            for w, _ in adj[v]:
                if w not in dist:
                    dist[w] = dist[v] + 1
                    nxt.append(w)
        frontier = nxt
    node_ids = sorted(dist)
    position = {v: k for k, v in enumerate(node_ids)}
    keep = set(node_ids)
    edges = [(position[i], position[j], e) for i, j, e in graph.edges
             if i in keep and j in keep]
    features = None
    if graph.node_features is not None:
        features = graph.node_features[node_ids]
    sub = AttributedGraph([graph.node_types[v] for v in node_ids], edges, features)
    return RootedSubgraph(sub, node_ids, position[root])
