"""Graph loading, label tables, splits, and the planted-partition generator."""

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from setembed import (GraphFormatError, LabelTable, load_graph, load_labels,
                      make_split, neighbors_by_type, planted_partition)
from setembed.graphdata import MULTICLASS, MULTILABEL

from conftest import write_edge_file, write_label_file


# ---------------------------------------------------------------- load_graph

def test_load_dedupes_and_symmetrizes(tmp_path):
    path = tmp_path / "edges.tsv"
    write_edge_file(path, [("a", "b"), ("b", "c"), ("a", "b")])
    g = load_graph(path)
    assert g.num_types == 1
    assert g.num_nodes == 3
    a, b, c = (g.name_to_id[x] for x in "abc")
    assert g.adjacency[a][0] == [b]
    assert sorted(g.adjacency[b][0]) == sorted([a, c])
    assert g.adjacency[c][0] == [b]
    g.validate()


def test_load_drops_self_loop_with_warning(tmp_path, caplog):
    path = tmp_path / "edges.tsv"
    write_edge_file(path, [("a", "a"), ("a", "b")])
    with caplog.at_level("WARNING"):
        g = load_graph(path)
    assert any("self loop" in r.message for r in caplog.records)
    a = g.name_to_id["a"]
    assert a not in g.adjacency[a][0]
    assert g.degree(a) == 1


def test_load_skips_comments_and_blanks(tmp_path):
    path = tmp_path / "edges.tsv"
    path.write_text("# header\n\na\tb\n  \nb\tc\n", encoding="utf-8")
    assert load_graph(path).num_nodes == 3


def test_load_malformed_row_reports_line(tmp_path):
    path = tmp_path / "edges.tsv"
    path.write_text("a\tb\nc only one field\n", encoding="utf-8")
    with pytest.raises(GraphFormatError, match="line 2"):
        load_graph(path)


def test_load_typed_slots(tmp_path):
    edges = tmp_path / "edges.tsv"
    types = tmp_path / "types.tsv"
    write_edge_file(edges, [("u1", "t1")])
    types.write_text("u1\t0\nt1\t1\n", encoding="utf-8")
    g = load_graph(edges, types)
    assert g.num_types == 2
    u1, t1 = g.name_to_id["u1"], g.name_to_id["t1"]
    assert g.adjacency[u1] == [[], [t1]]
    assert g.adjacency[t1] == [[u1], []]
    g.validate()


def test_load_typed_missing_endpoint(tmp_path):
    edges = tmp_path / "edges.tsv"
    types = tmp_path / "types.tsv"
    write_edge_file(edges, [("u1", "mystery")])
    types.write_text("u1\t0\n", encoding="utf-8")
    with pytest.raises(GraphFormatError, match="mystery"):
        load_graph(edges, types)


@pytest.mark.parametrize("row,what", [
    ("u1\tnope", "not an integer"),
    ("u1\t-3", "out of range"),
])
def test_load_bad_type_rows(tmp_path, row, what):
    edges = tmp_path / "edges.tsv"
    types = tmp_path / "types.tsv"
    write_edge_file(edges, [("u1", "u1")])
    types.write_text(row + "\n", encoding="utf-8")
    with pytest.raises(GraphFormatError, match=what):
        load_graph(edges, types)


def test_load_duplicate_type_row(tmp_path):
    edges = tmp_path / "edges.tsv"
    types = tmp_path / "types.tsv"
    write_edge_file(edges, [("a", "b")])
    types.write_text("a\t0\nb\t0\na\t1\n", encoding="utf-8")
    with pytest.raises(GraphFormatError, match="duplicate"):
        load_graph(edges, types)


def test_edge_list_round_trip(tmp_path):
    g1, _ = planted_partition(3, 6, 0.5, 0.1, seed=7)
    path = tmp_path / "edges.tsv"
    path.write_text("".join(line + "\n" for line in g1.edge_lines()),
                    encoding="utf-8")
    g2 = load_graph(path)
    # same node set under the original names and same neighbor structure
    relabel = {v: g2.name_to_id[g1.names[v]] for v in range(g1.num_nodes)}
    for v in range(g1.num_nodes):
        want = sorted(relabel[u] for u in g1.adjacency[v][0])
        assert g2.adjacency[relabel[v]][0] == want


def test_neighbors_by_type(bipartite_graph):
    assert neighbors_by_type(bipartite_graph, 0) == [[], [3, 4]]
    assert neighbors_by_type(bipartite_graph, 3) == [[0, 1, 2], []]
    with pytest.raises(IndexError):
        neighbors_by_type(bipartite_graph, 99)


# --------------------------------------------------------------- load_labels

def test_labels_multiclass_max_index(tmp_path):
    edges = tmp_path / "edges.tsv"
    labs = tmp_path / "labels.tsv"
    write_edge_file(edges, [("a", "b")])
    write_label_file(labs, {"a": 0, "b": 2})
    g = load_graph(edges)
    table = load_labels(labs, g, MULTICLASS)
    assert table.num_classes == 3
    assert table.labels[g.name_to_id["b"]] == 2
    assert table.labeled_types == {0}


def test_labels_multilabel_indicator(tmp_path):
    edges = tmp_path / "edges.tsv"
    labs = tmp_path / "labels.tsv"
    write_edge_file(edges, [("a", "b")])
    write_label_file(labs, {"a": "0,2"})
    g = load_graph(edges)
    table = load_labels(labs, g, MULTILABEL)
    assert table.num_classes == 3
    npt.assert_array_equal(table.labels[g.name_to_id["a"]], [1.0, 0.0, 1.0])
    npt.assert_array_equal(table.indicator(g.name_to_id["a"]), [1.0, 0.0, 1.0])


@pytest.mark.parametrize("value,what", [
    ("z\t0", "'z'"),              # unknown node named in the message
    ("a\t-1", "negative"),
    ("a\tx", "non-integer"),
])
def test_labels_bad_rows(tmp_path, value, what):
    edges = tmp_path / "edges.tsv"
    labs = tmp_path / "labels.tsv"
    write_edge_file(edges, [("a", "b")])
    labs.write_text(value + "\n", encoding="utf-8")
    g = load_graph(edges)
    with pytest.raises(GraphFormatError, match=what):
        load_labels(labs, g, MULTICLASS)


def test_labels_unknown_mode(tmp_path):
    edges = tmp_path / "edges.tsv"
    write_edge_file(edges, [("a", "b")])
    with pytest.raises(ValueError, match="mode"):
        load_labels(edges, load_graph(edges), "ordinal")


# ---------------------------------------------------------------- make_split

def test_split_halves_eligible():
    graph, labels = planted_partition(2, 50, 0.3, 0.05, seed=1)
    split = make_split(graph, labels, 0.5, seed=9)
    assert len(split.labeled) == 50
    assert len(split.test) == 50
    assert split.labeled | split.test == set(range(100))
    assert not split.labeled & split.test


def test_split_deterministic():
    graph, labels = planted_partition(2, 20, 0.3, 0.05, seed=1)
    s1 = make_split(graph, labels, 0.3, seed=4)
    s2 = make_split(graph, labels, 0.3, seed=4)
    assert s1.labeled == s2.labeled and s1.test == s2.test
    s3 = make_split(graph, labels, 0.3, seed=5)
    assert s3.labeled != s1.labeled


def test_split_rounds_half_up():
    graph, labels = planted_partition(1, 3, 0.0, 0.0, seed=0)
    split = make_split(graph, labels, 0.5, seed=0)   # 1.5 eligible -> 2
    assert len(split.labeled) == 2


def test_split_only_labeled_types(bipartite_graph):
    labels = LabelTable(mode=MULTICLASS, num_classes=2,
                        labels={0: 0, 1: 1, 2: 0}, labeled_types={0})
    split = make_split(bipartite_graph, labels, 0.5, seed=0)
    assert (split.labeled | split.test) == {0, 1, 2}


def test_split_rejects_bad_fraction():
    graph, labels = planted_partition(2, 5, 0.5, 0.1, seed=0)
    for bad in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(ValueError):
            make_split(graph, labels, bad, seed=0)


def test_split_no_eligible_nodes(bipartite_graph):
    labels = LabelTable(mode=MULTICLASS, num_classes=2, labels={0: 0},
                        labeled_types={1})
    with pytest.raises(ValueError, match="eligible"):
        make_split(bipartite_graph, labels, 0.5, seed=0)


@settings(max_examples=100, deadline=None)
@given(frac=st.floats(0.01, 0.99), seed=st.integers(0, 2**32 - 1))
def test_split_partitions_eligible_exactly(frac, seed):
    graph, labels = planted_partition(2, 10, 0.4, 0.1, seed=3)
    split = make_split(graph, labels, frac, seed=seed)
    eligible = set(range(20))
    assert split.labeled | split.test == eligible
    assert not split.labeled & split.test
    assert len(split.labeled) == int(np.floor(frac * 20 + 0.5))


# --------------------------------------------------------- planted_partition

def test_planted_degenerate_probabilities():
    g, table = planted_partition(2, 3, 1.0, 0.0, seed=0)
    g.validate()
    for v in range(3):
        assert sorted(g.adjacency[v][0]) == sorted(set(range(3)) - {v})
    for v in range(3, 6):
        assert sorted(g.adjacency[v][0]) == sorted(set(range(3, 6)) - {v})
    assert table.num_classes == 2
    assert [table.labels[v] for v in range(6)] == [0, 0, 0, 1, 1, 1]


def test_planted_edgeless():
    g, _ = planted_partition(2, 4, 0.0, 0.0, seed=0)
    assert sum(g.degree(v) for v in range(8)) == 0


def test_planted_reproducible():
    g1, _ = planted_partition(3, 10, 0.3, 0.02, seed=11)
    g2, _ = planted_partition(3, 10, 0.3, 0.02, seed=11)
    assert g1.adjacency == g2.adjacency


def test_planted_intra_edge_count_within_4_sigma():
    g, table = planted_partition(4, 50, 0.2, 0.01, seed=0)
    pairs = 50 * 49 / 2
    mean, sigma = pairs * 0.2, np.sqrt(pairs * 0.2 * 0.8)
    for comm in range(4):
        members = {v for v in range(200) if table.labels[v] == comm}
        count = sum(1 for u, v in g.edges() if u in members and v in members)
        assert abs(count - mean) <= 4 * sigma


def test_planted_rejects_bad_arguments():
    with pytest.raises(ValueError):
        planted_partition(0, 5, 0.5, 0.1, seed=0)
    with pytest.raises(ValueError):
        planted_partition(2, 0, 0.5, 0.1, seed=0)
    with pytest.raises(ValueError):
        planted_partition(2, 5, 1.5, 0.1, seed=0)
