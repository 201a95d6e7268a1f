"""Joint objective: reconstruction, heads, merged gradients, prediction."""

import math

import numpy as np
import numpy.testing as npt
import pytest
from scipy import optimize
from scipy.special import expit

from setembed import HeadParams, LabelTable, ModelState, init_params
from setembed.graphdata import MULTICLASS, MULTILABEL, DataSplit
from setembed.model import (aggregate_all, build_bundle, multilabel_head_loss,
                            neighbor_matrices, predict_multiclass,
                            predict_multilabel, reconstruction_loss,
                            softmax_head_loss, state_tensors, total_objective)
from setembed.setfn import forward

from conftest import build_graph


def make_state(graph, d=2, L=2, T=2, Q=2, seed=0, num_classes=None,
               per_coord=False):
    rng = np.random.default_rng(seed)
    agg = init_params(graph.num_types, d, L, T, Q, seed=seed,
                      per_coord=per_coord)
    head = None
    if num_classes:
        head = HeadParams(W=rng.standard_normal((num_classes, d)),
                          b=rng.standard_normal(num_classes))
    return ModelState(emb=rng.standard_normal((graph.num_nodes, d)),
                      agg=agg, head=head)


def one_node_split(v=0):
    return DataSplit(labeled={v}, test=set(), seed=0, labeled_fraction=0.5)


# --------------------------------------------------- batched forward pass

def test_build_bundle_reads_adjacency(six_node_graph):
    state = make_state(six_node_graph, seed=1)
    bundle = build_bundle(six_node_graph, state.emb, 2)
    npt.assert_array_equal(bundle[0], state.emb[[0, 1, 3]].T)


def test_neighbor_matrix_rows_select_neighbors(bipartite_graph):
    state = make_state(bipartite_graph, seed=2)
    mats = neighbor_matrices(bipartite_graph)
    type_nodes = bipartite_graph.nodes_of_type
    for v in range(bipartite_graph.num_nodes):
        for k in range(2):
            summed = mats[k][v] @ state.emb[type_nodes[k]]
            direct = state.emb[bipartite_graph.adjacency[v][k]].sum(axis=0)
            npt.assert_allclose(np.asarray(summed).ravel(), direct,
                                rtol=1e-12, atol=1e-12)


def test_neighbor_matrix_cap_requires_rng(six_node_graph):
    with pytest.raises(ValueError, match="rng"):
        neighbor_matrices(six_node_graph, cap=1)
    rng = np.random.default_rng(0)
    mats = neighbor_matrices(six_node_graph, cap=1, rng=rng)
    assert mats[0].getnnz() == six_node_graph.num_nodes   # one pick per node


@pytest.mark.parametrize("per_coord", [False, True])
def test_aggregate_all_matches_per_node_forward(bipartite_graph, per_coord):
    state = make_state(bipartite_graph, d=3, seed=5, per_coord=per_coord)
    mats = neighbor_matrices(bipartite_graph)
    F, _ = aggregate_all(state.agg, state.emb, mats,
                         bipartite_graph.nodes_of_type)
    for v in range(bipartite_graph.num_nodes):
        bundle = build_bundle(bipartite_graph, state.emb, v)
        npt.assert_allclose(F[v], forward(state.agg, bundle),
                            rtol=1e-12, atol=1e-12)


# -------------------------------------------------------- reconstruction

def test_reconstruction_perfect_fit_is_zero():
    graph = build_graph(1, [0, 0, 0], [])        # no edges at all
    state = make_state(graph, d=2, seed=3)
    resting = forward(state.agg, [np.zeros((2, 0))])
    state.emb[:] = resting                        # every node at the fixed point
    loss, grads = reconstruction_loss(state, graph, [1.0])
    assert loss == pytest.approx(0.0, abs=1e-30)
    for arr in grads.values():
        npt.assert_allclose(arr, 0.0, atol=1e-15)


def test_reconstruction_single_node_hand_value():
    graph = build_graph(1, [0], [])
    agg = init_params(1, 1, 1, 1, 1, seed=0)
    agg.c[:] = 1.0
    agg.b[:] = 0.0                                # resting output sigma(0)=0.5
    state = ModelState(emb=np.array([[1.0]]), agg=agg, head=None)
    loss, _ = reconstruction_loss(state, graph, [1.0])
    assert loss == pytest.approx(0.25, abs=1e-15)


def test_reconstruction_lambda_scaling(six_node_graph):
    state = make_state(six_node_graph, seed=7)
    base, _ = reconstruction_loss(state, six_node_graph, [0.005])
    doubled, _ = reconstruction_loss(state, six_node_graph, [0.01])
    assert doubled == base / 2                    # exact: power-of-two scale
    scaled, _ = reconstruction_loss(state, six_node_graph, [0.005 * 4])
    assert scaled == base / 4


def test_reconstruction_validates_lambdas(six_node_graph):
    state = make_state(six_node_graph)
    with pytest.raises(ValueError):
        reconstruction_loss(state, six_node_graph, [0.1, 0.2])
    with pytest.raises(ValueError):
        reconstruction_loss(state, six_node_graph, [-1.0])


def test_reconstruction_empty_type_with_weight():
    graph = build_graph(2, [0, 0], [(0, 1)])      # type 1 exists but is empty
    state = make_state(graph)
    with pytest.raises(ValueError, match="type 1"):
        reconstruction_loss(state, graph, [1.0, 1.0])


def test_reconstruction_minibatch_matches_direct_sum(six_node_graph):
    """Subset normalization: counts come from the batch, not the graph."""
    state = make_state(six_node_graph, seed=11)
    nodes = np.array([0, 2, 5])
    loss, _ = reconstruction_loss(state, six_node_graph, [0.5], nodes=nodes)
    direct = 0.0
    for v in nodes:
        f = forward(state.agg, build_bundle(six_node_graph, state.emb, v))
        direct += np.sum((state.emb[v] - f) ** 2) / (0.5 * len(nodes))
    assert loss == pytest.approx(direct, rel=1e-12)


def test_reconstruction_workers_agree(six_node_graph):
    state = make_state(six_node_graph, seed=13)
    l1, g1 = reconstruction_loss(state, six_node_graph, [0.2], workers=1)
    l2, g2 = reconstruction_loss(state, six_node_graph, [0.2], workers=3)
    l2b, g2b = reconstruction_loss(state, six_node_graph, [0.2], workers=3)
    assert l2 == l2b                              # fixed worker count: bitwise
    for name in g2:
        npt.assert_array_equal(g2[name], g2b[name])
    assert l1 == pytest.approx(l2, rel=1e-12)
    for name in g1:
        npt.assert_allclose(g1[name], g2[name], rtol=1e-10, atol=1e-12)


# ------------------------------------------------------------------ heads

def test_softmax_uniform_logits_ln2():
    graph = build_graph(1, [0], [])
    state = make_state(graph, d=2, num_classes=2, seed=0)
    state.head.W[:] = 0.0
    state.head.b[:] = 0.0
    labels = LabelTable(mode=MULTICLASS, num_classes=2, labels={0: 0},
                        labeled_types={0})
    data, reg, _ = softmax_head_loss(state, labels, one_node_split(), 0.0)
    assert data == pytest.approx(math.log(2), abs=1e-12)
    assert reg == 0.0


def test_softmax_biased_logits_hand_value():
    graph = build_graph(1, [0], [])
    state = make_state(graph, d=2, num_classes=2, seed=0)
    state.head.W[:] = 0.0
    state.head.b[:] = [0.0, math.log(3.0)]
    labels = LabelTable(mode=MULTICLASS, num_classes=2, labels={0: 1},
                        labeled_types={0})
    data, _, _ = softmax_head_loss(state, labels, one_node_split(), 0.0)
    assert data == pytest.approx(-math.log(3 / 4), abs=1e-12)
    assert data == pytest.approx(0.287682, abs=1e-6)


def test_softmax_regularizer_arithmetic():
    graph = build_graph(1, [0], [])
    state = make_state(graph, d=2, num_classes=2, seed=0)
    state.head.W[:] = [[2.0, 0.0], [0.0, 0.0]]    # Frobenius norm^2 = 4
    state.head.b[:] = 0.0
    labels = LabelTable(mode=MULTICLASS, num_classes=2, labels={0: 0},
                        labeled_types={0})
    _, reg, _ = softmax_head_loss(state, labels, one_node_split(), 1e-3)
    assert reg == pytest.approx(0.004, abs=1e-15)


def test_softmax_rejects_bad_inputs():
    graph = build_graph(1, [0], [])
    state = make_state(graph, d=2, num_classes=2, seed=0)
    labels = LabelTable(mode=MULTICLASS, num_classes=2, labels={0: 5},
                        labeled_types={0})
    with pytest.raises(ValueError, match="class count"):
        softmax_head_loss(state, labels, one_node_split(), 0.0)
    empty = DataSplit(labeled=set(), test={0}, seed=0, labeled_fraction=0.5)
    good = LabelTable(mode=MULTICLASS, num_classes=2, labels={0: 1},
                      labeled_types={0})
    with pytest.raises(ValueError, match="empty"):
        softmax_head_loss(state, good, empty, 0.0)
    ml = LabelTable(mode=MULTILABEL, num_classes=2,
                    labels={0: np.array([1.0, 0.0])}, labeled_types={0})
    with pytest.raises(ValueError, match="multiclass"):
        softmax_head_loss(state, ml, one_node_split(), 0.0)


def test_multilabel_hand_values():
    graph = build_graph(1, [0], [])
    state = make_state(graph, d=2, num_classes=1, seed=0)
    state.head.W[:] = 0.0
    state.head.b[:] = 0.0
    split = one_node_split()
    for y in (0.0, 1.0):                          # symmetric at zero logit
        labels = LabelTable(mode=MULTILABEL, num_classes=1,
                            labels={0: np.array([y])}, labeled_types={0})
        data, _, _ = multilabel_head_loss(state, labels, split, 0.0)
        assert data == pytest.approx(math.log(2), abs=1e-12)
    state.head.b[:] = 2.0
    labels = LabelTable(mode=MULTILABEL, num_classes=1,
                        labels={0: np.array([1.0])}, labeled_types={0})
    data, _, _ = multilabel_head_loss(state, labels, split, 0.0)
    assert data == pytest.approx(math.log(1 + math.e**2) - 2, abs=1e-12)
    assert data == pytest.approx(0.126928, abs=1e-6)


def test_multilabel_mean_over_labeled_nodes():
    graph = build_graph(1, [0, 0], [])
    state = make_state(graph, d=2, num_classes=2, seed=1)
    labels = LabelTable(mode=MULTILABEL, num_classes=2,
                        labels={0: np.array([1.0, 0.0]),
                                1: np.array([0.0, 1.0])},
                        labeled_types={0})
    both = DataSplit(labeled={0, 1}, test=set(), seed=0, labeled_fraction=0.5)
    d_both, _, _ = multilabel_head_loss(state, labels, both, 0.0)
    singles = []
    for v in (0, 1):
        d_one, _, _ = multilabel_head_loss(state, labels, one_node_split(v),
                                           0.0)
        singles.append(d_one)
    assert d_both == pytest.approx(np.mean(singles), rel=1e-12)


def test_head_gradients_vanish_at_optimum():
    """BFGS on our loss+gradient must drive the gradient to ~zero: a
    consistency check between the two."""
    graph = build_graph(1, [0], [])
    state = make_state(graph, d=3, num_classes=2, seed=0)
    labels = LabelTable(mode=MULTICLASS, num_classes=2, labels={0: 1},
                        labeled_types={0})
    split = one_node_split()
    C, d = 2, 3

    def fun(z):
        state.head.W[:] = z[:C * d].reshape(C, d)
        state.head.b[:] = z[C * d:]
        data, reg, grads = softmax_head_loss(state, labels, split, 1e-3)
        return data + reg, np.concatenate([grads["head.W"].ravel(),
                                           grads["head.b"]])

    res = optimize.minimize(fun, np.zeros(C * d + C), jac=True,
                            method="BFGS", options={"gtol": 1e-12,
                                                    "maxiter": 5000})
    _, grad = fun(res.x)
    assert np.max(np.abs(grad)) <= 1e-8


# --------------------------------------------------------- total objective

def test_total_additivity(six_node_graph, six_node_labels):
    state = make_state(six_node_graph, num_classes=2, seed=21)
    split = DataSplit(labeled={0, 3}, test={1, 2, 4, 5}, seed=0,
                      labeled_fraction=0.33)
    lb, grads = total_objective(state, six_node_graph, six_node_labels, split,
                                lambdas=[0.005], lambda_w=1e-3)
    assert lb.total == pytest.approx(
        lb.reconstruction + lb.supervised + lb.regularization, abs=1e-12)
    recon, rgrads = reconstruction_loss(state, six_node_graph, [0.005])
    sup, reg, hgrads = softmax_head_loss(state, six_node_labels, split, 1e-3)
    assert lb.reconstruction == pytest.approx(recon, rel=1e-15)
    assert lb.supervised == pytest.approx(sup, rel=1e-15)
    assert lb.regularization == pytest.approx(reg, rel=1e-15)
    npt.assert_allclose(grads["emb"], rgrads["emb"] + hgrads["emb"],
                        rtol=1e-12, atol=1e-15)
    npt.assert_allclose(grads["head.W"], hgrads["head.W"], rtol=1e-15)


def test_total_without_labels_is_reconstruction_only(six_node_graph):
    state = make_state(six_node_graph, num_classes=2, seed=2)
    lb, grads = total_objective(state, six_node_graph, None, None,
                                lambdas=[0.01], lambda_w=1e-3)
    assert lb.supervised == 0.0 and lb.regularization == 0.0
    assert lb.total == lb.reconstruction
    npt.assert_array_equal(grads["head.W"], 0.0)
    npt.assert_array_equal(grads["head.b"], 0.0)


def test_total_minibatch_skips_unlabeled_batches(six_node_graph,
                                                 six_node_labels):
    state = make_state(six_node_graph, num_classes=2, seed=4)
    split = DataSplit(labeled={0}, test={1, 2, 3, 4, 5}, seed=0,
                      labeled_fraction=0.17)
    lb, _ = total_objective(state, six_node_graph, six_node_labels, split,
                            lambdas=[0.01], lambda_w=1e-3,
                            nodes=np.array([3, 4]))
    assert lb.supervised == 0.0                   # batch holds no labeled node
    lb2, _ = total_objective(state, six_node_graph, six_node_labels, split,
                             lambdas=[0.01], lambda_w=1e-3,
                             nodes=np.array([0, 4]))
    assert lb2.supervised > 0.0


@pytest.mark.parametrize("fixture", ["six_node_graph", "bipartite_graph"])
def test_total_gradients_match_finite_differences(request, fixture):
    graph = request.getfixturevalue(fixture)
    K = graph.num_types
    state = make_state(graph, d=2, L=2, T=2, Q=2, num_classes=2, seed=31)
    labels = LabelTable(mode=MULTICLASS, num_classes=2,
                        labels={v: v % 2 for v in range(graph.num_nodes)
                                if graph.type_of[v] == 0},
                        labeled_types={0})
    labeled = set(labels.labels)
    split = DataSplit(labeled=labeled, test=set(), seed=0,
                      labeled_fraction=0.5)
    lambdas = [0.5] * K
    kw = dict(lambdas=lambdas, lambda_w=1e-3)
    _, grads = total_objective(state, graph, labels, split, **kw)
    params = state_tensors(state)
    step = 1e-6
    for name, arr in params.items():
        flat = arr.reshape(-1)
        gflat = grads[name].reshape(-1)
        for j in range(flat.size):
            saved = flat[j]
            flat[j] = saved + step
            up = total_objective(state, graph, labels, split, **kw)[0].total
            flat[j] = saved - step
            down = total_objective(state, graph, labels, split, **kw)[0].total
            flat[j] = saved
            fd = (up - down) / (2 * step)
            assert abs(gflat[j] - fd) <= 1e-5 * max(1.0, abs(gflat[j]),
                                                    abs(fd)), f"{name}[{j}]"


# -------------------------------------------------------------- prediction

def test_predict_multiclass_rules():
    graph = build_graph(1, [0], [])
    state = make_state(graph, d=2, num_classes=3, seed=0)
    state.emb[0] = [1.0, -1.0]
    state.head.W[:] = 0.0
    state.head.b[:] = [0.0, 1.0, 0.0]
    assert predict_multiclass(state, 0) == 1
    state.head.b[:] = 0.0                         # three-way tie
    assert predict_multiclass(state, 0) == 0
    state.head.b[:] = [0.1, 3.0, -2.0]
    assert predict_multiclass(state, 0) == 1
    shifted = predict_multiclass(state, 0)
    state.head.b += 17.5                          # constant logit shift
    assert predict_multiclass(state, 0) == shifted
    with pytest.raises(IndexError):
        predict_multiclass(state, 5)


def test_predict_multilabel_rules():
    graph = build_graph(1, [0], [])
    state = make_state(graph, d=2, num_classes=3, seed=0)
    state.emb[0] = 0.0
    state.head.W[:] = 0.0
    state.head.b[:] = 0.0
    npt.assert_array_equal(predict_multilabel(state, 0), [1, 1, 1])
    npt.assert_array_equal(predict_multilabel(state, 0, threshold=0.99),
                           [0, 0, 0])
    state.head.b[:] = [-1.0, 0.0, 2.0]
    npt.assert_array_equal(predict_multilabel(state, 0), [0, 1, 1])
    assert expit(-1.0) == pytest.approx(0.2689, abs=1e-4)
    with pytest.raises(ValueError):
        predict_multilabel(state, 0, threshold=1.5)
    with pytest.raises(IndexError):
        predict_multilabel(state, 9)
