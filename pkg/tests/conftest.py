"""Shared fixtures and slow reference implementations for the test suite.

The reference aggregator here is deliberately written with explicit Python
loops and no shared code with the package, so it can serve as an independent
oracle for the vectorized forward pass.
"""

import math

import numpy as np
import pytest

from setembed import HeteroGraph, LabelTable
from setembed.graphdata import MULTICLASS


def _sigma(name, x):
    if name == "logistic":
        return 1.0 / (1.0 + math.exp(-x))
    return math.tanh(x)


def slow_forward(params, bundle):
    """Loop-based aggregation identical in math to setfn.forward."""
    d, K, L = params.dim, params.num_types, params.L
    S = []
    for k in range(K):
        X = np.asarray(bundle[k], dtype=float)
        if X.size == 0:
            X = X.reshape(d, 0)
        T, Q = params.T(k), params.Q(k)
        s = np.zeros((T, Q))
        for n in range(X.shape[1]):
            for t in range(T):
                z = float(params.a[k][t] @ X[:, n])
                for q in range(Q):
                    s[t, q] += _sigma(params.activation,
                                      params.u[k][q] * z + params.v[k][q])
        S.append(s)
    out = np.zeros(d)
    for m in range(d):
        for l in range(L):
            h = (params.b[m, l] if params.per_coord else params.b[l])
            for k in range(K):
                w = params.w[k][m, l] if params.per_coord else params.w[k][l]
                for t in range(params.T(k)):
                    for q in range(params.Q(k)):
                        h += w[t, q] * S[k][t, q]
            out[m] += params.c[m, l] * _sigma(params.activation, h)
    return out


def build_graph(num_types, type_of, edges, names=None):
    """Assemble a HeteroGraph from an undirected edge list of dense ids."""
    type_of = np.asarray(type_of, dtype=np.int64)
    n = len(type_of)
    adjacency = [[[] for _ in range(num_types)] for _ in range(n)]
    for u, v in edges:
        adjacency[u][type_of[v]].append(v)
        adjacency[v][type_of[u]].append(u)
    for slots in adjacency:
        for lst in slots:
            lst.sort()
    graph = HeteroGraph(num_types=num_types, type_of=type_of,
                        adjacency=adjacency,
                        names=names or [str(i) for i in range(n)])
    graph.validate()
    return graph


@pytest.fixture
def two_node_graph():
    return build_graph(1, [0, 0], [(0, 1)])


@pytest.fixture
def six_node_graph():
    """Homogeneous toy: two triangles joined by one bridge edge."""
    return build_graph(1, [0] * 6,
                       [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)])


@pytest.fixture
def bipartite_graph():
    """Typed toy: three type-0 nodes each linked to both type-1 nodes."""
    return build_graph(2, [0, 0, 0, 1, 1],
                       [(0, 3), (0, 4), (1, 3), (1, 4), (2, 3), (2, 4)])


@pytest.fixture
def six_node_labels():
    return LabelTable(mode=MULTICLASS, num_classes=2,
                      labels={v: (0 if v < 3 else 1) for v in range(6)},
                      labeled_types={0})


def write_edge_file(path, pairs):
    path.write_text("".join(f"{u}\t{v}\n" for u, v in pairs),
                    encoding="utf-8")


def write_label_file(path, mapping):
    path.write_text("".join(f"{k}\t{v}\n" for k, v in mapping.items()),
                    encoding="utf-8")
