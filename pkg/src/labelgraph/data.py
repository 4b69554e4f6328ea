"""Dataset model, file formats, splits, and the planted-motif generator.

Graphs are undirected with typed nodes and typed edges, stored once per
edge and expanded to both directions when adjacency is needed. Label
dependency graphs are directed (interaction scores are asymmetric).

File formats (JSON lines, one record per line):

* graph dataset: header ``{"C": int, "node_types": int, "edge_types": int}``
  then ``{"nodes": [t0, ...], "edges": [[i, j, e], ...], "labels": [c, ...],
  "features": [[...], ...]?}`` where ``labels`` lists the indices of the
  positive classes.
* vector dataset: header ``{"C": int, "d": int}`` then
  ``{"features": [...], "labels": [...]}`` with ``labels`` the full binary
  vector.
* label graph: plain text rows ``src dst score``; a directed edge src->dst
  is kept iff score > threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParseError, ValidationError
from .seeding import substream


def reject_unknown_keys(mapping: dict, allowed, context: str) -> None:
    """Typo safety for JSON documents: any key outside `allowed` is an error."""
    for key in mapping:
        if key not in allowed:
            raise ValidationError(f"{context}: unknown key {key!r}")


# ---------------------------------------------------------------------------
# core types
# ---------------------------------------------------------------------------

class AttributedGraph:
    """Undirected graph with integer node types and typed edges."""

    __slots__ = ("node_types", "edges", "node_features", "_adjacency", "_avg_cache")

    def __init__(self, node_types, edges, node_features=None):
        self.node_types = [int(t) for t in node_types]
        n = len(self.node_types)
        if n < 1:
            raise ValidationError("graph must have at least one node")
        self.edges = []
        for i, j, e in edges:
            i, j, e = int(i), int(j), int(e)
            if not (0 <= i < n and 0 <= j < n):
                raise ValidationError(f"edge ({i}, {j}) out of range for {n} nodes")
            if i == j:
                raise ValidationError(f"self-loop on node {i} is not allowed")
            self.edges.append((i, j, e))
        if node_features is not None:
            node_features = np.asarray(node_features, dtype=np.float64)
            if node_features.ndim != 2 or node_features.shape[0] != n:
                raise ValidationError("node_features must be one row per node")
        self.node_features = node_features
        self._adjacency = None
        self._avg_cache = {}

    @property
    def num_nodes(self) -> int:
        return len(self.node_types)

    def adjacency(self):
        """Per-node list of (neighbor, edge_type), both directions of each edge."""
        if self._adjacency is None:
            adj = [[] for _ in range(self.num_nodes)]
            for i, j, e in self.edges:
                adj[i].append((j, e))
                adj[j].append((i, e))
            self._adjacency = adj
        return self._adjacency

    def averaging_matrices(self, num_edge_types: int):
        """P[e][i, j] = (# type-e edges i~j) / deg(i); rows of isolated nodes are zero.

        Cached: graphs are immutable after construction.
        """
        cached = self._avg_cache.get(num_edge_types)
        if cached is not None:
            return cached
        n = self.num_nodes
        mats = [np.zeros((n, n)) for _ in range(num_edge_types)]
        degree = np.zeros(n)
        for i, neigh in enumerate(self.adjacency()):
            degree[i] = len(neigh)
            for j, e in neigh:
                mats[e][i, j] += 1.0
        for mat in mats:
            nz = degree > 0
            mat[nz] /= degree[nz, None]
        self._avg_cache[num_edge_types] = mats
        return mats

    def edge_type_lookup(self):
        """(i, j) -> set of edge types, symmetric; used by the subgraph oracle."""
        table = {}
        for i, j, e in self.edges:
            table.setdefault((i, j), set()).add(e)
            table.setdefault((j, i), set()).add(e)
        return table


class LabelGraph:
    """Directed dependency edges over label ids; messages flow along edges."""

    __slots__ = ("num_labels", "edges", "num_edge_types", "_avg_cache")

    def __init__(self, num_labels, edges=(), num_edge_types=1):
        self.num_labels = int(num_labels)
        self.edges = []
        for src, dst, e in edges:
            src, dst, e = int(src), int(dst), int(e)
            if not (0 <= src < self.num_labels and 0 <= dst < self.num_labels):
                raise ValidationError(f"label edge ({src}, {dst}) out of range for {self.num_labels} labels")
            self.edges.append((src, dst, e))
        self.num_edge_types = max(1, int(num_edge_types))
        self._avg_cache = None

    def in_neighbors(self, c: int):
        return [(src, e) for src, dst, e in self.edges if dst == c]

    def averaging_matrices(self):
        """P[e][c, f] = (# type-e edges f->c) / indeg(c); labels with no
        incoming edges get a zero row."""
        if self._avg_cache is None:
            n = self.num_labels
            mats = [np.zeros((n, n)) for _ in range(self.num_edge_types)]
            indeg = np.zeros(n)
            for src, dst, e in self.edges:
                mats[e][dst, src] += 1.0
                indeg[dst] += 1.0
            for mat in mats:
                nz = indeg > 0
                mat[nz] /= indeg[nz, None]
            self._avg_cache = mats
        return self._avg_cache


@dataclass
class LabeledExample:
    """One training instance: a graph or feature vector plus its binary labels."""
    input: object  # AttributedGraph or 1-D numpy feature vector
    labels: np.ndarray

    def is_graph(self) -> bool:
        return isinstance(self.input, AttributedGraph)


@dataclass(frozen=True)
class DatasetMeta:
    """Shape information the model needs to size its parameters."""
    num_labels: int
    num_node_types: int
    num_edge_types: int
    num_label_edge_types: int = 0
    feature_width: int = 0


class MultilabelDataset:
    def __init__(self, examples, num_labels, num_node_types=0, num_edge_types=0,
                 input_kind="graph", feature_width=0, label_graph=None):
        if input_kind not in ("graph", "vector"):
            raise ValidationError(f"input_kind must be 'graph' or 'vector', got {input_kind!r}")
        self.examples = list(examples)
        self.num_labels = int(num_labels)
        self.num_node_types = int(num_node_types)
        self.num_edge_types = int(num_edge_types)
        self.input_kind = input_kind
        self.feature_width = int(feature_width)
        self.label_graph = label_graph
        self._validate()

    def _validate(self):
        for k, ex in enumerate(self.examples):
            labels = np.asarray(ex.labels)
            if labels.shape != (self.num_labels,):
                raise ValidationError(f"example {k}: labels must have length {self.num_labels}")
            if not np.isin(labels, (0, 1)).all():
                raise ValidationError(f"example {k}: labels must be 0/1")
            if self.input_kind == "graph":
                if not ex.is_graph():
                    raise ValidationError(f"example {k}: expected a graph input")
                g = ex.input
                if any(t < 0 or t >= self.num_node_types for t in g.node_types):
                    raise ValidationError(f"example {k}: node type out of range")
                if any(e < 0 or e >= self.num_edge_types for _, _, e in g.edges):
                    raise ValidationError(f"example {k}: edge type out of range")
            else:
                if ex.is_graph():
                    raise ValidationError(f"example {k}: expected a vector input")
                if np.asarray(ex.input).shape != (self.feature_width,):
                    raise ValidationError(f"example {k}: feature width differs from {self.feature_width}")

    def __len__(self):
        return len(self.examples)

    def __getitem__(self, k):
        return self.examples[k]

    def meta(self) -> DatasetMeta:
        lg_types = self.label_graph.num_edge_types if self.label_graph is not None else 0
        return DatasetMeta(
            num_labels=self.num_labels,
            num_node_types=self.num_node_types,
            num_edge_types=self.num_edge_types,
            num_label_edge_types=lg_types,
            feature_width=self.feature_width,
        )

    def replace(self, examples) -> "MultilabelDataset":
        return MultilabelDataset(examples, self.num_labels, self.num_node_types,
                                 self.num_edge_types, self.input_kind,
                                 self.feature_width, self.label_graph)


def dataset_stats(dataset: MultilabelDataset) -> dict:
    """Per-dataset summary used by manifests and the CLI."""
    stats = {
        "examples": len(dataset),
        "labels": dataset.num_labels,
        "input_kind": dataset.input_kind,
        "positives_per_label": [int(sum(int(ex.labels[c]) for ex in dataset.examples))
                                for c in range(dataset.num_labels)],
    }
    if dataset.input_kind == "graph":
        nodes = [ex.input.num_nodes for ex in dataset.examples]
        edges = [len(ex.input.edges) for ex in dataset.examples]
        stats["avg_nodes"] = float(np.mean(nodes))
        stats["avg_edges"] = float(np.mean(edges))
        stats["node_types"] = dataset.num_node_types
        stats["edge_types"] = dataset.num_edge_types
    else:
        stats["feature_width"] = dataset.feature_width
    return stats


# ---------------------------------------------------------------------------
# file I/O
# ---------------------------------------------------------------------------

def _read_json_lines(path):
    with open(path, "r", encoding="utf8") as handle:
        raw = [line.rstrip("\n") for line in handle]
    lines = [(k + 1, line) for k, line in enumerate(raw) if line.strip()]
    if not lines:
        raise ParseError(f"{path}: no records")
    decoded = []
    for lineno, line in lines:
        try:
            decoded.append((lineno, json.loads(line)))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: line {lineno}: {exc.msg}") from exc
    return decoded


def load_graph_dataset(path) -> MultilabelDataset:
    decoded = _read_json_lines(path)
    lineno, header = decoded[0]
    reject_unknown_keys(header, {"C", "node_types", "edge_types"}, f"{path}: header")
    try:
        num_labels = int(header["C"])
        num_node_types = int(header["node_types"])
        num_edge_types = int(header["edge_types"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: line {lineno}: bad header") from exc
    if len(decoded) < 2:
        raise ParseError(f"{path}: no records")

    examples = []
    feature_width = None
    for lineno, rec in decoded[1:]:
        reject_unknown_keys(rec, {"nodes", "edges", "labels", "features"}, f"{path}: line {lineno}")
        try:
            graph = AttributedGraph(rec["nodes"], rec.get("edges", []),
                                    rec.get("features"))
        except (KeyError, TypeError, ValidationError) as exc:
            raise ValidationError(f"{path}: line {lineno}: {exc}") from exc
        width = graph.node_features.shape[1] if graph.node_features is not None else 0
        if feature_width is None:
            feature_width = width
        elif width != feature_width:
            raise ValidationError(f"{path}: line {lineno}: inconsistent feature width")
        labels = np.zeros(num_labels, dtype=np.int8)
        for c in rec.get("labels", []):
            c = int(c)
            if not 0 <= c < num_labels:
                raise ValidationError(f"{path}: line {lineno}: label {c} out of range")
            labels[c] = 1
        examples.append(LabeledExample(graph, labels))

    return MultilabelDataset(examples, num_labels, num_node_types, num_edge_types,
                             input_kind="graph", feature_width=feature_width or 0)


def save_graph_dataset(dataset: MultilabelDataset, path) -> None:
    if dataset.input_kind != "graph":
        raise ValidationError("save_graph_dataset needs a graph dataset")
    with open(path, "w", encoding="utf8") as handle:
        header = {"C": dataset.num_labels, "node_types": dataset.num_node_types,
                  "edge_types": dataset.num_edge_types}
        handle.write(json.dumps(header) + "\n")
        for ex in dataset.examples:
            rec = {
                "nodes": list(ex.input.node_types),
                "edges": [[i, j, e] for i, j, e in ex.input.edges],
                "labels": [c for c in range(dataset.num_labels) if ex.labels[c]],
            }
            if ex.input.node_features is not None:
                rec["features"] = ex.input.node_features.tolist()
            handle.write(json.dumps(rec) + "\n")


def load_vector_dataset(path) -> MultilabelDataset:
    decoded = _read_json_lines(path)
    lineno, header = decoded[0]
    reject_unknown_keys(header, {"C", "d"}, f"{path}: header")
    try:
        num_labels = int(header["C"])
        width = int(header["d"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: line {lineno}: bad header") from exc
    if len(decoded) < 2:
        raise ParseError(f"{path}: no records")

    examples = []
    for lineno, rec in decoded[1:]:
        reject_unknown_keys(rec, {"features", "labels"}, f"{path}: line {lineno}")
        features = np.asarray(rec.get("features", []), dtype=np.float64)
        if features.shape != (width,):
            raise ValidationError(f"{path}: line {lineno}: feature width differs from {width}")
        labels = np.asarray(rec.get("labels", []), dtype=np.int8)
        if labels.shape != (num_labels,) or not np.isin(labels, (0, 1)).all():
            raise ValidationError(f"{path}: line {lineno}: labels must be a 0/1 vector of length {num_labels}")
        examples.append(LabeledExample(features, labels))

    return MultilabelDataset(examples, num_labels, input_kind="vector",
                             feature_width=width)


def save_vector_dataset(dataset: MultilabelDataset, path) -> None:
    if dataset.input_kind != "vector":
        raise ValidationError("save_vector_dataset needs a vector dataset")
    with open(path, "w", encoding="utf8") as handle:
        handle.write(json.dumps({"C": dataset.num_labels, "d": dataset.feature_width}) + "\n")
        for ex in dataset.examples:
            rec = {"features": np.asarray(ex.input).tolist(),
                   "labels": [int(v) for v in ex.labels]}
            handle.write(json.dumps(rec) + "\n")


def load_label_graph(path, num_labels: int, threshold: float = 0.5) -> LabelGraph:
    """Read ``src dst score`` rows; keep directed edges with score > threshold."""
    edges = []
    with open(path, "r", encoding="utf8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ParseError(f"{path}: line {lineno}: expected 'src dst score'")
            try:
                src, dst, score = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: expected 'src dst score'") from exc
            if not 0.0 <= score <= 1.0:
                raise ValidationError(f"{path}: line {lineno}: score {score} outside [0, 1]")
            if not (0 <= src < num_labels and 0 <= dst < num_labels):
                raise ValidationError(f"{path}: line {lineno}: label id out of range for {num_labels} labels")
            if score > threshold:
                edges.append((src, dst, 0))
    return LabelGraph(num_labels, edges, num_edge_types=1)


# ---------------------------------------------------------------------------
# splits
# ---------------------------------------------------------------------------

def split(dataset: MultilabelDataset, ratios=(0.6, 0.2, 0.2), seed: int = 0):
    """Deterministic shuffle, then floor-sized valid/test with the remainder
    going to train."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3:
        raise DomainError("split needs exactly three ratios")
    if any(r < 0 for r in ratios):
        raise DomainError(f"split ratios must be non-negative, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise DomainError(f"split ratios must sum to 1, got {sum(ratios)}")
    n = len(dataset)
    n_valid = int(np.floor(ratios[1] * n))
    n_test = int(np.floor(ratios[2] * n))
    n_train = n - n_valid - n_test
    order = substream(seed, "split").permutation(n)
    pick = lambda idx: dataset.replace([dataset.examples[i] for i in idx])
    return (pick(order[:n_train]),
            pick(order[n_train:n_train + n_valid]),
            pick(order[n_train + n_valid:]))


# ---------------------------------------------------------------------------
# motifs and the subgraph-isomorphism oracle
# ---------------------------------------------------------------------------

@dataclass
class Motif:
    """A connected target pattern with a designated root node."""
    node_types: list
    edges: list
    root: int = 0

    def __post_init__(self):
        self.node_types = [int(t) for t in self.node_types]
        self.edges = [(int(i), int(j), int(e)) for i, j, e in self.edges]
        n = len(self.node_types)
        if not 0 <= self.root < n:
            raise ValidationError(f"motif root {self.root} out of range")
        for i, j, _ in self.edges:
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise ValidationError(f"motif edge ({i}, {j}) invalid")
        if self._distances_from(self.root).count(-1):
            raise ValidationError("motif pattern must be connected")

    @property
    def size(self) -> int:
        return len(self.node_types)

    def _distances_from(self, start):
        dist = [-1] * self.size
        dist[start] = 0
        frontier = [start]
        adj = [[] for _ in range(self.size)]
        for i, j, _ in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        while frontier:
            nxt = []
            for v in frontier:
                for w in adj[v]:
                    if dist[w] < 0:
                        dist[w] = dist[v] + 1
                        nxt.append(w)
            frontier = nxt
        return dist

    @property
    def radius(self) -> int:
        """Max distance from root to any pattern node."""
        return max(self._distances_from(self.root))


def find_subgraph(motif: Motif, graph: AttributedGraph):
    """First occurrence of `motif` in `graph` as a node mapping, or None.

    Occurrence means subgraph monomorphism: an injective map preserving node
    types and carrying every motif edge to a graph edge of the same type
    (extra graph edges are allowed). Exhaustive backtracking; intended for
    graphs of at most ~30 nodes.
    """
    p = motif.size
    if p > graph.num_nodes:
        return None
    lookup = graph.edge_type_lookup()

    # visit pattern nodes in BFS order from the root so every new node is
    # constrained by at least one already-mapped neighbor
    order = []
    seen = [False] * p
    queue = [motif.root]
    seen[motif.root] = True
    adj = [[] for _ in range(p)]
    for i, j, e in motif.edges:
        adj[i].append((j, e))
        adj[j].append((i, e))
    while queue:
        v = queue.pop(0)
        order.append(v)
        for w, _ in adj[v]:
            if not seen[w]:
                seen[w] = True
                queue.append(w)
    position = {v: k for k, v in enumerate(order)}
    constraints = []  # per step: list of (earlier step, edge type)
    for v in order:
        cons = [(position[w], e) for w, e in adj[v] if position[w] < position[v]]
        constraints.append(cons)

    assignment = [-1] * p
    used = [False] * graph.num_nodes

    def extend(step):
        if step == p:
            return True
        want_type = motif.node_types[order[step]]
        for v in range(graph.num_nodes):
            if used[v] or graph.node_types[v] != want_type:
                continue
            ok = True
            for earlier, e in constraints[step]:
                types = lookup.get((assignment[earlier], v))
                if types is None or e not in types:
                    ok = False
                    break
            if not ok:
                continue
            assignment[step] = v
            used[v] = True
            if extend(step + 1):
                return True
            used[v] = False
            assignment[step] = -1
        return False

    if extend(0):
        mapping = [0] * p
        for step, v in enumerate(order):
            mapping[v] = assignment[step]
        return mapping
    return None


def contains_subgraph(motif: Motif, graph: AttributedGraph) -> bool:
    return find_subgraph(motif, graph) is not None


# ---------------------------------------------------------------------------
# synthetic generator
# ---------------------------------------------------------------------------

ORACLE_NODE_CAP = 30  # keeps the exhaustive oracle tractable


@dataclass
class MotifSpec:
    """Recipe for a planted-motif dataset: one target pattern per class, a
    random typed background, and optional decoy fragments as noise."""
    motifs: list
    num_node_types: int
    num_edge_types: int
    background_types: list
    background_size: tuple = (2, 3)
    background_edge_prob: float = 0.3
    decoys: list = field(default_factory=list)
    max_decoys: int = 0
    decoy_prob: float = 0.0
    plant_prob: float = 0.5
    max_nodes: int = 20

    def __post_init__(self):
        if not self.motifs:
            raise ValidationError("motif spec needs at least one class motif")
        if self.max_nodes > ORACLE_NODE_CAP:
            raise DomainError(f"max_nodes {self.max_nodes} exceeds the oracle cap of {ORACLE_NODE_CAP}")
        lo, hi = self.background_size
        if not 1 <= lo <= hi:
            raise ValidationError(f"background_size {self.background_size} invalid")
        for m in list(self.motifs) + list(self.decoys):
            if m.size > self.max_nodes:
                raise DomainError(f"motif of size {m.size} larger than max graph size {self.max_nodes}")
            if any(t < 0 or t >= self.num_node_types for t in m.node_types):
                raise ValidationError("motif node type out of range")
            if any(e < 0 or e >= self.num_edge_types for _, _, e in m.edges):
                raise ValidationError("motif edge type out of range")
        if any(t < 0 or t >= self.num_node_types for t in self.background_types):
            raise ValidationError("background node type out of range")

    @property
    def num_classes(self) -> int:
        return len(self.motifs)


def _plant(nodes, edges, rng, component: Motif, background_n: int, num_edge_types: int):
    """Append a component's nodes and edges, then bridge its root to one
    background node so the graph stays loosely connected."""
    offset = len(nodes)
    nodes.extend(component.node_types)
    for i, j, e in component.edges:
        edges.append((offset + i, offset + j, e))
    target = int(rng.integers(0, background_n))
    edges.append((offset + component.root, target, int(rng.integers(0, num_edge_types))))
    return list(range(offset, offset + component.size))


def generate_synthetic(spec: MotifSpec, n: int, seed: int, return_records: bool = False):
    """Generate `n` graphs with motifs planted per class with probability
    `plant_prob`; the label of class c is decided by the subgraph oracle,
    not by the planting record, so chance occurrences count as positives.
    """
    if n < 1:
        raise DomainError(f"need n >= 1, got {n}")
    rng = substream(seed, "generate")
    examples = []
    records = []
    for _ in range(n):
        lo, hi = spec.background_size
        bg_n = int(rng.integers(lo, hi + 1))
        nodes = [int(rng.choice(spec.background_types)) for _ in range(bg_n)]
        edges = []
        for i in range(bg_n):
            for j in range(i + 1, bg_n):
                if rng.random() < spec.background_edge_prob:
                    edges.append((i, j, int(rng.integers(0, spec.num_edge_types))))

        planted = {}
        for c, motif in enumerate(spec.motifs):
            if rng.random() < spec.plant_prob and len(nodes) + motif.size <= spec.max_nodes:
                planted[c] = _plant(nodes, edges, rng, motif, bg_n, spec.num_edge_types)

        decoy_count = 0
        while decoy_count < spec.max_decoys and spec.decoys and rng.random() < spec.decoy_prob:
            decoy = spec.decoys[int(rng.integers(0, len(spec.decoys)))]
            if len(nodes) + decoy.size > spec.max_nodes:
                break
            _plant(nodes, edges, rng, decoy, bg_n, spec.num_edge_types)
            decoy_count += 1

        graph = AttributedGraph(nodes, edges)
        labels = np.zeros(spec.num_classes, dtype=np.int8)
        for c, motif in enumerate(spec.motifs):
            labels[c] = 1 if contains_subgraph(motif, graph) else 0
        examples.append(LabeledExample(graph, labels))
        records.append({"planted": sorted(planted), "planted_nodes": planted,
                        "positive": [c for c in range(spec.num_classes) if labels[c]]})

    dataset = MultilabelDataset(examples, spec.num_classes, spec.num_node_types,
                                spec.num_edge_types, input_kind="graph")
    if return_records:
        return dataset, records
    return dataset


def demo_motif_spec() -> MotifSpec:
    """Three-class recipe whose classes share every single-hop neighborhood
    signature and differ only in arm endpoint types two hops from the root,
    so one round of message passing cannot separate them.

    Type-1 and type-2 nodes appear only inside planted components, the
    components are vertex-disjoint, and bridges leave from type-2 roots, so
    a class pattern occurs iff it was planted.
    """
    path5 = [(0, 1, 0), (1, 2, 0), (2, 3, 0), (3, 4, 0)]
    path3 = [(0, 1, 0), (1, 2, 0)]
    motifs = [
        Motif([0, 1, 2, 1, 0], path5, root=2),
        Motif([3, 1, 2, 1, 3], path5, root=2),
        Motif([0, 1, 2, 1, 3], path5, root=2),
    ]
    decoys = [
        Motif([1, 2, 1], path3, root=1),   # bare center, arms without endpoints
        Motif([0, 1, 2], path3, root=2),   # half arm with endpoint 0
        Motif([3, 1, 2], path3, root=2),   # half arm with endpoint 3
    ]
    return MotifSpec(motifs=motifs, num_node_types=4, num_edge_types=2,
                     background_types=[0, 3], background_size=(2, 3),
                     background_edge_prob=0.3, decoys=decoys, max_decoys=2,
                     decoy_prob=0.7, plant_prob=0.5, max_nodes=20)


# ---------------------------------------------------------------------------
# motif spec (de)serialization for the CLI
# ---------------------------------------------------------------------------

_MOTIF_KEYS = {"node_types", "edges", "root"}
_SPEC_KEYS = {"motifs", "num_node_types", "num_edge_types", "background_types",
              "background_size", "background_edge_prob", "decoys", "max_decoys",
              "decoy_prob", "plant_prob", "max_nodes"}


def _motif_from_dict(d: dict, context: str) -> Motif:
    reject_unknown_keys(d, _MOTIF_KEYS, context)
    return Motif(d["node_types"], [tuple(e) for e in d.get("edges", [])],
                 root=d.get("root", 0))


def motif_spec_from_dict(d: dict) -> MotifSpec:
    reject_unknown_keys(d, _SPEC_KEYS, "motif spec")
    try:
        motifs = [_motif_from_dict(m, f"motifs[{k}]") for k, m in enumerate(d["motifs"])]
    except KeyError as exc:
        raise ValidationError("motif spec: missing key 'motifs'") from exc
    decoys = [_motif_from_dict(m, f"decoys[{k}]") for k, m in enumerate(d.get("decoys", []))]
    return MotifSpec(
        motifs=motifs,
        num_node_types=int(d["num_node_types"]),
        num_edge_types=int(d["num_edge_types"]),
        background_types=list(d["background_types"]),
        background_size=tuple(d.get("background_size", (2, 3))),
        background_edge_prob=float(d.get("background_edge_prob", 0.3)),
        decoys=decoys,
        max_decoys=int(d.get("max_decoys", 0)),
        decoy_prob=float(d.get("decoy_prob", 0.0)),
        plant_prob=float(d.get("plant_prob", 0.5)),
        max_nodes=int(d.get("max_nodes", 20)),
    )


def motif_spec_to_dict(spec: MotifSpec) -> dict:
    as_motif = lambda m: {"node_types": m.node_types,
                          "edges": [list(e) for e in m.edges], "root": m.root}
    return {
        "motifs": [as_motif(m) for m in spec.motifs],
        "num_node_types": spec.num_node_types,
        "num_edge_types": spec.num_edge_types,
        "background_types": list(spec.background_types),
        "background_size": list(spec.background_size),
        "background_edge_prob": spec.background_edge_prob,
        "decoys": [as_motif(m) for m in spec.decoys],
        "max_decoys": spec.max_decoys,
        "decoy_prob": spec.decoy_prob,
        "plant_prob": spec.plant_prob,
        "max_nodes": spec.max_nodes,
    }
