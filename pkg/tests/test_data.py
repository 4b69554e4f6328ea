"""Dataset formats, splits, label graphs, motifs, and the synthetic generator."""

import json

import numpy as np
import pytest

from labelgraph import data as gdata
from labelgraph.data import (AttributedGraph, LabeledExample, Motif,
                             MotifSpec, MultilabelDataset, contains_subgraph,
                             demo_motif_spec, find_subgraph, generate_synthetic,
                             split)
from labelgraph.errors import DomainError, ParseError, ValidationError


def triangle_dataset_lines():
    return [
        json.dumps({"C": 2, "node_types": 3, "edge_types": 1}),
        json.dumps({"nodes": [0, 1, 2], "edges": [[0, 1, 0], [1, 2, 0], [2, 0, 0]],
                    "labels": [0]}),
    ]


# ---------------------------------------------------------------------------
# graph structure
# ---------------------------------------------------------------------------

def test_adjacency_is_symmetric_expansion():
    g = AttributedGraph([0, 1, 2], [(0, 1, 0), (1, 2, 1)])
    adj = g.adjacency()
    for i, neigh in enumerate(adj):
        for j, e in neigh:
            assert (i, e) in adj[j]


def test_self_loop_rejected():
    with pytest.raises(ValidationError):
        AttributedGraph([0, 1], [(1, 1, 0)])


def test_averaging_matrices_mean_over_all_neighbors():
    g = AttributedGraph([0, 0, 0], [(0, 1, 0), (0, 2, 1)])
    mats = g.averaging_matrices(2)
    # node 0 has two neighbors, one per type; each contributes 1/2
    assert mats[0][0, 1] == 0.5 and mats[1][0, 2] == 0.5
    assert mats[0][1, 0] == 1.0 and mats[1][2, 0] == 1.0


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def test_load_graph_dataset_triangle(tmp_path):
    path = tmp_path / "d.jsonl"
    path.write_text("\n".join(triangle_dataset_lines()) + "\n")
    ds = gdata.load_graph_dataset(path)
    assert len(ds) == 1 and ds.num_labels == 2
    assert ds[0].input.num_nodes == 3
    assert ds[0].labels.tolist() == [1, 0]


def test_empty_file_reports_no_records(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    with pytest.raises(ParseError, match="no records"):
        gdata.load_graph_dataset(path)


def test_malformed_line_reports_line_number(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(triangle_dataset_lines()[0] + "\n{broken\n")
    with pytest.raises(ParseError, match="line 2"):
        gdata.load_graph_dataset(path)


def test_type_out_of_range_rejected(tmp_path):
    path = tmp_path / "bad.jsonl"
    lines = [json.dumps({"C": 1, "node_types": 2, "edge_types": 1}),
             json.dumps({"nodes": [0, 5], "edges": [], "labels": []})]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValidationError):
        gdata.load_graph_dataset(path)


def test_label_index_out_of_range_rejected(tmp_path):
    path = tmp_path / "bad.jsonl"
    lines = [json.dumps({"C": 2, "node_types": 1, "edge_types": 1}),
             json.dumps({"nodes": [0], "edges": [], "labels": [2]})]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValidationError):
        gdata.load_graph_dataset(path)


def test_graph_dataset_round_trip(tmp_path):
    ds = generate_synthetic(demo_motif_spec(), 20, seed=5)
    first = tmp_path / "a.jsonl"
    second = tmp_path / "b.jsonl"
    gdata.save_graph_dataset(ds, first)
    loaded = gdata.load_graph_dataset(first)
    gdata.save_graph_dataset(loaded, second)
    assert first.read_text() == second.read_text()
    again = gdata.load_graph_dataset(second)
    for a, b in zip(loaded.examples, again.examples):
        assert a.input.node_types == b.input.node_types
        assert a.input.edges == b.input.edges
        assert np.array_equal(a.labels, b.labels)


def test_vector_dataset_single_record(tmp_path):
    path = tmp_path / "v.jsonl"
    path.write_text(json.dumps({"C": 1, "d": 2}) + "\n"
                    + json.dumps({"features": [0, 0], "labels": [1]}) + "\n")
    ds = gdata.load_vector_dataset(path)
    assert ds.feature_width == 2 and ds.num_labels == 1
    assert ds[0].labels.tolist() == [1]


def test_vector_dataset_ragged_width_rejected(tmp_path):
    path = tmp_path / "v.jsonl"
    path.write_text(json.dumps({"C": 1, "d": 2}) + "\n"
                    + json.dumps({"features": [0, 0], "labels": [1]}) + "\n"
                    + json.dumps({"features": [0, 0, 0], "labels": [1]}) + "\n")
    with pytest.raises(ValidationError):
        gdata.load_vector_dataset(path)


def test_vector_dataset_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(1)
    examples = [LabeledExample(rng.uniform(-5, 5, 4),
                               rng.integers(0, 2, 3).astype(np.int8))
                for _ in range(100)]
    ds = MultilabelDataset(examples, 3, input_kind="vector", feature_width=4)
    path = tmp_path / "v.jsonl"
    gdata.save_vector_dataset(ds, path)
    loaded = gdata.load_vector_dataset(path)
    for a, b in zip(ds.examples, loaded.examples):
        assert np.array_equal(np.asarray(a.input), np.asarray(b.input))
        assert np.array_equal(a.labels, b.labels)


# ---------------------------------------------------------------------------
# label graph
# ---------------------------------------------------------------------------

def test_label_graph_threshold_keeps_strictly_greater(tmp_path):
    path = tmp_path / "lg.txt"
    path.write_text("0 1 0.6\n1 0 0.4\n")
    lg = gdata.load_label_graph(path, num_labels=2, threshold=0.5)
    assert lg.edges == [(0, 1, 0)]
    assert lg.in_neighbors(1) == [(0, 0)]


def test_label_graph_all_below_threshold_is_empty(tmp_path):
    path = tmp_path / "lg.txt"
    path.write_text("0 1 0.2\n1 0 0.1\n")
    lg = gdata.load_label_graph(path, num_labels=2, threshold=0.5)
    assert lg.edges == []


def test_label_graph_threshold_zero_keeps_positive_scores(tmp_path):
    path = tmp_path / "lg.txt"
    path.write_text("0 1 0.01\n1 0 0.0\n")
    lg = gdata.load_label_graph(path, num_labels=2, threshold=0.0)
    assert lg.edges == [(0, 1, 0)]


def test_label_graph_score_out_of_range(tmp_path):
    path = tmp_path / "lg.txt"
    path.write_text("0 1 1.5\n")
    with pytest.raises(ValidationError):
        gdata.load_label_graph(path, num_labels=2)


def test_label_graph_id_out_of_range(tmp_path):
    path = tmp_path / "lg.txt"
    path.write_text("0 7 0.9\n")
    with pytest.raises(ValidationError):
        gdata.load_label_graph(path, num_labels=2)


# ---------------------------------------------------------------------------
# split
# ---------------------------------------------------------------------------

def _tiny_dataset(n):
    ex = [LabeledExample(AttributedGraph([0], []), np.array([k % 2], dtype=np.int8))
          for k in range(n)]
    return MultilabelDataset(ex, 1, 1, 1)


def test_split_sizes_ten_examples():
    tr, va, te = split(_tiny_dataset(10), seed=3)
    assert (len(tr), len(va), len(te)) == (6, 2, 2)


def test_split_remainder_goes_to_train():
    tr, va, te = split(_tiny_dataset(11), seed=3)
    assert (len(tr), len(va), len(te)) == (7, 2, 2)


def test_split_is_deterministic_and_partitions():
    ds = _tiny_dataset(23)
    parts1 = split(ds, seed=9)
    parts2 = split(ds, seed=9)
    ids1 = [[id(ex) for ex in p.examples] for p in parts1]
    ids2 = [[id(ex) for ex in p.examples] for p in parts2]
    assert ids1 == ids2
    flat = [i for part in ids1 for i in part]
    assert sorted(flat) == sorted(id(ex) for ex in ds.examples)
    assert len(set(flat)) == len(flat)


def test_split_rejects_negative_ratio():
    with pytest.raises(DomainError):
        split(_tiny_dataset(5), ratios=(1.2, -0.1, -0.1), seed=0)


def test_split_rejects_bad_sum():
    with pytest.raises(DomainError):
        split(_tiny_dataset(5), ratios=(0.5, 0.2, 0.2), seed=0)


# ---------------------------------------------------------------------------
# motifs and the subgraph oracle
# ---------------------------------------------------------------------------

def test_motif_radius_and_connectivity():
    m = Motif([0, 1, 2, 1, 0], [(0, 1, 0), (1, 2, 0), (2, 3, 0), (3, 4, 0)], root=2)
    assert m.radius == 2
    with pytest.raises(ValidationError):
        Motif([0, 1], [])  # disconnected


def test_oracle_finds_planted_copy():
    motif = Motif([0, 1, 2], [(0, 1, 0), (1, 2, 1)], root=0)
    graph = AttributedGraph([3, 0, 1, 2], [(0, 1, 0), (1, 2, 0), (2, 3, 1)])
    mapping = find_subgraph(motif, graph)
    assert mapping == [1, 2, 3]


def test_oracle_respects_edge_types():
    motif = Motif([0, 1], [(0, 1, 1)])
    graph = AttributedGraph([0, 1], [(0, 1, 0)])
    assert not contains_subgraph(motif, graph)


def test_oracle_allows_extra_edges():
    motif = Motif([0, 0, 0], [(0, 1, 0), (1, 2, 0)])
    graph = AttributedGraph([0, 0, 0], [(0, 1, 0), (1, 2, 0), (0, 2, 0)])
    assert contains_subgraph(motif, graph)


def test_oracle_requires_injective_mapping():
    motif = Motif([0, 1, 0], [(0, 1, 0), (1, 2, 0)])
    graph = AttributedGraph([0, 1], [(0, 1, 0)])  # only one type-0 node
    assert not contains_subgraph(motif, graph)


def test_radius_zero_motif_is_node_presence():
    spec = MotifSpec(motifs=[Motif([7], [])], num_node_types=8, num_edge_types=1,
                     background_types=[6], background_size=(3, 5),
                     background_edge_prob=0.4, plant_prob=0.5, max_nodes=10)
    ds = generate_synthetic(spec, 40, seed=2)
    for ex in ds.examples:
        assert bool(ex.labels[0]) == (7 in ex.input.node_types)


def test_generated_labels_always_match_oracle():
    spec = demo_motif_spec()
    ds, records = generate_synthetic(spec, 60, seed=11, return_records=True)
    for ex, rec in zip(ds.examples, records):
        for c, motif in enumerate(spec.motifs):
            assert bool(ex.labels[c]) == contains_subgraph(motif, ex.input)
        assert rec["positive"] == [c for c in range(3) if ex.labels[c]]


def test_planted_motif_always_found():
    spec = demo_motif_spec()
    _, records = generate_synthetic(spec, 100, seed=4, return_records=True)
    planted_any = sum(len(r["planted"]) for r in records)
    assert planted_any > 0
    for r in records:
        for c in r["planted"]:
            assert c in r["positive"]  # oracle soundness on planted copies


def test_chance_occurrences_are_labeled_by_oracle():
    """With motif node types present in the background, the oracle, not the
    planting record, defines the label; every mismatch must be a chance copy
    the oracle re-verifies."""
    motif = Motif([0, 1], [(0, 1, 0)])
    spec = MotifSpec(motifs=[motif], num_node_types=2, num_edge_types=1,
                     background_types=[0, 1], background_size=(3, 6),
                     background_edge_prob=0.5, plant_prob=0.4, max_nodes=12)
    ds, records = generate_synthetic(spec, 200, seed=8, return_records=True)
    mismatches = 0
    for ex, rec in zip(ds.examples, records):
        oracle_says = contains_subgraph(motif, ex.input)
        assert bool(ex.labels[0]) == oracle_says
        if bool(ex.labels[0]) != (0 in rec["planted"]):
            mismatches += 1
            assert oracle_says  # only direction possible: chance positives
    assert mismatches > 0


def test_generator_respects_node_cap():
    spec = demo_motif_spec()
    ds = generate_synthetic(spec, 150, seed=6)
    assert max(ex.input.num_nodes for ex in ds.examples) <= spec.max_nodes


def test_oversized_motif_rejected():
    big = Motif(list(range(1)) * 12, [(i, i + 1, 0) for i in range(11)])
    with pytest.raises(DomainError):
        MotifSpec(motifs=[big], num_node_types=1, num_edge_types=1,
                  background_types=[0], background_size=(2, 2),
                  background_edge_prob=0.1, max_nodes=10)


def test_motif_spec_dict_round_trip():
    spec = demo_motif_spec()
    doc = gdata.motif_spec_to_dict(spec)
    again = gdata.motif_spec_from_dict(json.loads(json.dumps(doc)))
    assert gdata.motif_spec_to_dict(again) == doc


def test_motif_spec_rejects_unknown_key():
    doc = gdata.motif_spec_to_dict(demo_motif_spec())
    doc["plantprob"] = 0.5
    with pytest.raises(ValidationError, match="plantprob"):
        gdata.motif_spec_from_dict(doc)


def test_dataset_stats_reports_mean_nodes():
    ds = generate_synthetic(demo_motif_spec(), 30, seed=3)
    stats = gdata.dataset_stats(ds)
    expected = np.mean([ex.input.num_nodes for ex in ds.examples])
    assert stats["avg_nodes"] == pytest.approx(expected)
