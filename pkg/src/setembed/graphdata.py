"""Typed graph containers, file loaders, label tables, and data splits.

Graphs are undirected with nodes partitioned into one or more types.  Each
node keeps one neighbor list per type, sorted ascending, so downstream sums
run in a canonical order regardless of file order.  Everything here is
immutable after load and safe for concurrent readers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

MULTICLASS = "multiclass"
MULTILABEL = "multilabel"


class GraphFormatError(ValueError):
    """Malformed graph/label input; message carries the offending line."""


@dataclass
class HeteroGraph:
    """Undirected graph with a total, disjoint node-type partition.

    adjacency[v][k] lists the type-k neighbors of node v (dense int ids,
    ascending, no duplicates, no self loops).  ``names`` maps dense ids back
    to the original string ids from the input files.
    """

    num_types: int
    type_of: np.ndarray              # (num_nodes,) int
    adjacency: list[list[list[int]]]
    names: list[str]
    name_to_id: dict[str, int] = field(repr=False, default_factory=dict)

    def __post_init__(self):
        if not self.name_to_id:
            self.name_to_id = {n: i for i, n in enumerate(self.names)}

    @property
    def num_nodes(self) -> int:
        return len(self.adjacency)

    @property
    def nodes_of_type(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.type_of == k) for k in range(self.num_types)]

    def type_counts(self) -> list[int]:
        return [int(np.sum(self.type_of == k)) for k in range(self.num_types)]

    def degree(self, v: int) -> int:
        return sum(len(lst) for lst in self.adjacency[v])

    def edges(self):
        """Yield each undirected edge once as a dense-id pair (u, v), u < v."""
        for u in range(self.num_nodes):
            for lst in self.adjacency[u]:
                for v in lst:
                    if u < v:
                        yield u, v

    def edge_lines(self):
        """Serialize to the on-disk edge-list format (original ids)."""
        for u, v in self.edges():
            yield f"{self.names[u]}\t{self.names[v]}"

    def validate(self):
        """Full invariant scan; raises AssertionError on violation."""
        n = self.num_nodes
        assert len(self.type_of) == n and len(self.names) == n
        assert self.type_of.min(initial=0) >= 0
        assert self.type_of.max(initial=0) < self.num_types
        for v in range(n):
            assert len(self.adjacency[v]) == self.num_types
            for k, lst in enumerate(self.adjacency[v]):
                assert lst == sorted(set(lst)), f"node {v} slot {k} not canonical"
                for u in lst:
                    assert u != v, f"self loop at {v}"
                    assert self.type_of[u] == k, f"node {u} in wrong slot of {v}"
                    back = self.adjacency[u][self.type_of[v]]
                    assert v in back, f"asymmetric edge ({v},{u})"


@dataclass
class LabelTable:
    """Node labels: one class index (multiclass) or a 0/1 indicator (multilabel)."""

    mode: str
    num_classes: int
    labels: dict[int, object]        # node id -> int, or np.ndarray of shape (C,)
    labeled_types: set[int]

    def indicator(self, v: int) -> np.ndarray:
        """Label of v as a length-C indicator vector (either mode)."""
        y = self.labels[v]
        if self.mode == MULTICLASS:
            out = np.zeros(self.num_classes)
            out[int(y)] = 1.0
            return out
        return np.asarray(y, dtype=float)


@dataclass
class DataSplit:
    labeled: set[int]
    test: set[int]
    seed: int
    labeled_fraction: float


def _parse_rows(path, n_fields, what):
    """Yield (line_number, fields) for tab-separated rows, skipping comments."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != n_fields or any(not f.strip() for f in fields):
                raise GraphFormatError(
                    f"{path}: line {lineno}: malformed {what} row: {line!r}")
            yield lineno, [f.strip() for f in fields]


def load_graph(edge_file, type_file=None) -> HeteroGraph:
    """Load an undirected typed graph from an edge list plus optional type file.

    Edges are symmetrized and deduplicated; self loops are dropped with a
    warning.  Without a type file the graph is homogeneous (one type).  With a
    type file, every edge endpoint must be listed in it.
    """
    names: list[str] = []
    idx: dict[str, int] = {}
    types: list[int] = []

    if type_file is not None:
        for lineno, (name, t) in _parse_rows(type_file, 2, "type"):
            try:
                tid = int(t)
            except ValueError:
                raise GraphFormatError(
                    f"{type_file}: line {lineno}: type-id not an integer: {t!r}")
            if tid < 0:
                raise GraphFormatError(
                    f"{type_file}: line {lineno}: type-id out of range: {tid}")
            if name in idx:
                raise GraphFormatError(
                    f"{type_file}: line {lineno}: duplicate node {name!r}")
            idx[name] = len(names)
            names.append(name)
            types.append(tid)
        if not names:
            raise GraphFormatError(f"{type_file}: no node/type rows")
        num_types = max(types) + 1
    else:
        num_types = 1

    def node_id(name, lineno):
        if name in idx:
            return idx[name]
        if type_file is not None:
            raise GraphFormatError(
                f"{edge_file}: line {lineno}: node {name!r} missing from type file")
        idx[name] = len(names)
        names.append(name)
        types.append(0)
        return idx[name]

    edges: set[tuple[int, int]] = set()
    for lineno, (src, dst) in _parse_rows(edge_file, 2, "edge"):
        u = node_id(src, lineno)
        v = node_id(dst, lineno)
        if u == v:
            log.warning("%s: line %d: dropping self loop on %r", edge_file, lineno, src)
            continue
        edges.add((min(u, v), max(u, v)))

    type_of = np.array(types, dtype=np.int64)
    adjacency = [[[] for _ in range(num_types)] for _ in range(len(names))]
    for u, v in edges:
        adjacency[u][type_of[v]].append(v)
        adjacency[v][type_of[u]].append(u)
    for slots in adjacency:
        for lst in slots:
            lst.sort()

    return HeteroGraph(num_types=num_types, type_of=type_of,
                       adjacency=adjacency, names=names)


def load_labels(label_file, graph: HeteroGraph, mode: str) -> LabelTable:
    """Load node labels; C is 1 + the largest label index seen."""
    if mode not in (MULTICLASS, MULTILABEL):
        raise ValueError(f"unknown label mode {mode!r}")
    raw: dict[int, list[int]] = {}
    max_label = -1
    for lineno, (name, lab) in _parse_rows(label_file, 2, "label"):
        if name not in graph.name_to_id:
            raise GraphFormatError(
                f"{label_file}: line {lineno}: node {name!r} not in graph")
        parts = [p for p in lab.split(",") if p.strip()] if mode == MULTILABEL else [lab]
        if not parts:
            raise GraphFormatError(
                f"{label_file}: line {lineno}: empty label list for {name!r}")
        try:
            vals = [int(p) for p in parts]
        except ValueError:
            raise GraphFormatError(
                f"{label_file}: line {lineno}: non-integer label in {lab!r}")
        if any(x < 0 for x in vals):
            raise GraphFormatError(
                f"{label_file}: line {lineno}: negative label in {lab!r}")
        raw[graph.name_to_id[name]] = vals
        max_label = max(max_label, *vals)
    if max_label < 0:
        raise GraphFormatError(f"{label_file}: no label rows")

    C = max_label + 1
    labels: dict[int, object] = {}
    for v, vals in raw.items():
        if mode == MULTICLASS:
            labels[v] = vals[0]
        else:
            ind = np.zeros(C)
            ind[vals] = 1.0
            labels[v] = ind
    labeled_types = {int(graph.type_of[v]) for v in labels}
    return LabelTable(mode=mode, num_classes=C, labels=labels,
                      labeled_types=labeled_types)


def neighbors_by_type(graph: HeteroGraph, v: int) -> list[list[int]]:
    """The K typed neighbor lists of node v (possibly empty)."""
    if not 0 <= v < graph.num_nodes:
        raise IndexError(f"invalid node id {v}")
    return graph.adjacency[v]


def make_split(graph: HeteroGraph, labels: LabelTable, labeled_fraction: float,
               seed: int) -> DataSplit:
    """Sample labeled/test node sets uniformly without replacement.

    Eligible nodes are the labeled nodes whose type carries labels.  The
    labeled count rounds half-up.  Deterministic for a fixed seed.
    """
    if not 0.0 < labeled_fraction < 1.0:
        raise ValueError(f"labeled_fraction must be in (0,1), got {labeled_fraction}")
    eligible = sorted(v for v in labels.labels
                      if int(graph.type_of[v]) in labels.labeled_types)
    if not eligible:
        raise ValueError("no eligible labeled nodes to split")
    n_lab = int(np.floor(labeled_fraction * len(eligible) + 0.5))
    n_lab = min(max(n_lab, 0), len(eligible))
    rng = np.random.default_rng(np.uint64(seed))
    perm = rng.permutation(len(eligible))
    chosen = {eligible[i] for i in perm[:n_lab]}
    rest = {eligible[i] for i in perm[n_lab:]}
    return DataSplit(labeled=chosen, test=rest, seed=seed,
                     labeled_fraction=labeled_fraction)


def planted_partition(num_communities: int, community_size: int, p_in: float,
                      p_out: float, seed: int) -> tuple[HeteroGraph, LabelTable]:
    """Random homogeneous graph with planted communities; community = class.

    Every intra-community pair is linked with probability p_in, every
    inter-community pair with p_out.
    """
    if num_communities <= 0 or community_size <= 0:
        raise ValueError("need at least one community of at least one node")
    if not (0.0 <= p_in <= 1.0 and 0.0 <= p_out <= 1.0):
        raise ValueError("probabilities must lie in [0,1]")
    n = num_communities * community_size
    comm = np.repeat(np.arange(num_communities), community_size)
    rng = np.random.default_rng(np.uint64(seed))

    iu, ju = np.triu_indices(n, k=1)
    p = np.where(comm[iu] == comm[ju], p_in, p_out)
    keep = rng.random(len(iu)) < p

    adjacency = [[[]] for _ in range(n)]
    for u, v in zip(iu[keep], ju[keep]):
        adjacency[int(u)][0].append(int(v))
        adjacency[int(v)][0].append(int(u))
    for slots in adjacency:
        slots[0].sort()

    graph = HeteroGraph(num_types=1,
                        type_of=np.zeros(n, dtype=np.int64),
                        adjacency=adjacency,
                        names=[str(i) for i in range(n)])
    table = LabelTable(mode=MULTICLASS, num_classes=num_communities,
                       labels={v: int(comm[v]) for v in range(n)},
                       labeled_types={0})
    return graph, table
