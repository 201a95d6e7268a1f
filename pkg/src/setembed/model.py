"""Joint objective: neighborhood reconstruction plus a supervised head.

The optimization variables are the per-node embedding table, the shared
aggregator weights, and a linear classifier head.  Gradients for all of them
are computed here by hand and returned as a flat name->array dict (see
TENSOR NAMES below) so the optimizer can treat everything uniformly.

Reconstruction is evaluated in a batched form: per-type element encodings for
all nodes at once, then sparse neighbor-sum matrices (CSR, ascending node
order) instead of a per-node loop.  The math is identical to aggregating each
node's bundle with setfn.forward; tests cross-check the two routes.

TENSOR NAMES: "emb", "agg.a{k}", "agg.u{k}", "agg.v{k}", "agg.w{k}",
"agg.c", "agg.b", "head.W", "head.b".
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .graphdata import MULTICLASS, MULTILABEL, HeteroGraph
from .setfn import AggParams, _act, _act_deriv_from_value


@dataclass
class HeadParams:
    """Linear classifier: one weight row and bias per class/label."""

    W: np.ndarray                    # (C, d)
    b: np.ndarray                    # (C,)

    @property
    def num_classes(self) -> int:
        return self.W.shape[0]


@dataclass
class ModelState:
    emb: np.ndarray                  # (num_nodes, d)
    agg: AggParams
    head: HeadParams

    def validate(self):
        assert self.emb.ndim == 2 and self.emb.shape[1] == self.agg.dim
        if self.head is not None:
            assert self.head.W.shape[1] == self.agg.dim


@dataclass
class LossBreakdown:
    reconstruction: float
    supervised: float
    regularization: float
    total: float


def make_breakdown(recon=0.0, sup=0.0, reg=0.0) -> LossBreakdown:
    return LossBreakdown(reconstruction=recon, supervised=sup,
                         regularization=reg, total=recon + sup + reg)


def state_tensors(state: ModelState) -> dict[str, np.ndarray]:
    """Live views of every optimized array, keyed by canonical name."""
    out = {"emb": state.emb}
    for name, arr in state.agg.tensors().items():
        out[f"agg.{name}"] = arr
    if state.head is not None:
        out["head.W"] = state.head.W
        out["head.b"] = state.head.b
    return out


def zeros_like_tensors(tensors: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in tensors.items()}


def add_grads(into: dict[str, np.ndarray], other: dict[str, np.ndarray]):
    for k, v in other.items():
        into[k] += v
    return into


def build_bundle(graph: HeteroGraph, emb: np.ndarray, v: int) -> list[np.ndarray]:
    """Typed neighbor bundle of v drawn from the current embedding table."""
    return [emb[lst].T if lst else np.zeros((emb.shape[1], 0))
            for lst in graph.adjacency[v]]


def neighbor_matrices(graph: HeteroGraph, cap=None, rng=None):
    """Per-type CSR matrices M_k of shape (num_nodes, |V_k|).

    Row v of M_k selects v's type-k neighbors (columns indexed by position
    within the type-k node list).  With a cap, rows longer than ``cap`` are
    replaced by a seeded uniform subsample.
    """
    n = graph.num_nodes
    pos_in_type = np.zeros(n, dtype=np.int64)
    type_nodes = graph.nodes_of_type
    for nodes in type_nodes:
        pos_in_type[nodes] = np.arange(len(nodes))

    mats = []
    for k in range(graph.num_types):
        indptr = np.zeros(n + 1, dtype=np.int64)
        chunks = []
        for v in range(n):
            nbrs = graph.adjacency[v][k]
            if cap is not None and len(nbrs) > cap:
                if rng is None:
                    raise ValueError("neighbor cap requires an rng")
                pick = rng.choice(len(nbrs), size=cap, replace=False)
                nbrs = sorted(nbrs[i] for i in pick)
            chunks.append(pos_in_type[nbrs] if nbrs else np.empty(0, dtype=np.int64))
            indptr[v + 1] = indptr[v] + len(nbrs)
        indices = np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int64)
        data = np.ones(len(indices))
        mats.append(sp.csr_matrix((data, indices, indptr),
                                  shape=(n, len(type_nodes[k]))))
    return mats


def _encode_all(agg: AggParams, emb: np.ndarray, type_nodes):
    """Element encodings for every node, grouped by type.

    Returns per type: E_k (n_k, d), Z_k (n_k, T), G_k (n_k, T, Q) and the
    flattened G_k (n_k, T*Q) used with the sparse neighbor matrices.
    """
    act = _act(agg.activation)
    out = []
    for k in range(agg.num_types):
        E = emb[type_nodes[k]]                            # (n_k, d)
        Z = E @ agg.a[k].T                                # (n_k, T)
        pre = agg.u[k][None, None, :] * Z[:, :, None] + agg.v[k][None, None, :]
        G = act(pre)                                      # (n_k, T, Q)
        out.append((E, Z, G, G.reshape(len(E), -1)))
    return out


def aggregate_all(agg: AggParams, emb: np.ndarray, mats, type_nodes,
                  rows=None):
    """Batched forward: aggregator output for target nodes ``rows`` (default all).

    Returns (F, cache) where F[i] is the aggregation of node rows[i]'s
    neighborhood and cache carries intermediates for the backward pass.
    """
    enc = _encode_all(agg, emb, type_nodes)
    act = _act(agg.activation)
    Ms = mats if rows is None else [m[rows] for m in mats]
    S = [np.asarray(Ms[k] @ enc[k][3]) for k in range(agg.num_types)]
    nv = S[0].shape[0] if agg.num_types else 0
    if agg.per_coord:
        H = np.broadcast_to(agg.b, (nv,) + agg.b.shape).copy()   # (nv, d, L)
        for k in range(agg.num_types):
            wk = agg.w[k].reshape(agg.dim, agg.L, -1)
            H += np.einsum("vj,dlj->vdl", S[k], wk)
        A = act(H)
        F = np.einsum("vdl,dl->vd", A, agg.c)
    else:
        H = agg.b[None, :] + np.zeros((nv, agg.L))        # (nv, L)
        for k in range(agg.num_types):
            H += S[k] @ agg.w[k].reshape(agg.L, -1).T
        A = act(H)
        F = A @ agg.c.T                                   # (nv, d)
    return F, (enc, Ms, S, A)


def aggregate_all_backward(agg: AggParams, emb: np.ndarray, upstream, cache,
                           type_nodes):
    """Backward of ``sum_i <upstream[i], F[i]>`` through aggregate_all.

    Returns gradients for the aggregator tensors plus the embedding table
    (neighbor columns only; the caller adds any direct-target terms).
    """
    enc, Ms, S, A = cache
    dact = _act_deriv_from_value
    grads = {f"agg.{n}": np.zeros_like(t) for n, t in agg.tensors().items()}
    demb = np.zeros_like(emb)

    if agg.per_coord:
        dA = upstream[:, :, None] * agg.c[None, :, :]     # (nv, d, L)
        grads["agg.c"] += np.einsum("vd,vdl->dl", upstream, A)
        dH = dA * dact(agg.activation, A)
        grads["agg.b"] += dH.sum(axis=0)
        dS = []
        for k in range(agg.num_types):
            wk = agg.w[k].reshape(agg.dim, agg.L, -1)
            grads[f"agg.w{k}"] += np.einsum("vdl,vj->dlj", dH, S[k]) \
                .reshape(agg.w[k].shape)
            dS.append(np.einsum("vdl,dlj->vj", dH, wk))
    else:
        dA = upstream @ agg.c                             # (nv, L)
        grads["agg.c"] += upstream.T @ A
        dH = dA * dact(agg.activation, A)
        grads["agg.b"] += dH.sum(axis=0)
        dS = []
        for k in range(agg.num_types):
            grads[f"agg.w{k}"] += (dH.T @ S[k]).reshape(agg.w[k].shape)
            dS.append(dH @ agg.w[k].reshape(agg.L, -1))

    for k in range(agg.num_types):
        E, Z, G, _ = enc[k]
        dGflat = np.asarray(Ms[k].T @ dS[k])              # (n_k, T*Q)
        dG = dGflat.reshape(G.shape)
        dpre = dG * dact(agg.activation, G)               # (n_k, T, Q)
        grads[f"agg.u{k}"] += np.einsum("ntq,nt->q", dpre, Z)
        grads[f"agg.v{k}"] += dpre.sum(axis=(0, 1))
        dZ = np.einsum("ntq,q->nt", dpre, agg.u[k])
        grads[f"agg.a{k}"] += dZ.T @ E
        demb[type_nodes[k]] += dZ @ agg.a[k]
    grads["emb"] = demb
    return grads


def reconstruction_loss(state: ModelState, graph: HeteroGraph, lambdas,
                        mats=None, nodes=None, workers=1):
    """Per-type weighted squared error between embeddings and aggregations.

    loss = sum_k 1/(lambda_k * n_k) * sum_{v of type k} ||x_v - f(bundle_v)||^2

    n_k counts the target nodes of type k (whole graph, or the ``nodes``
    subset under minibatching).  Gradients flow to every embedding both as a
    target and as a neighbor, and to all aggregator weights.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.shape != (graph.num_types,):
        raise ValueError(f"need {graph.num_types} lambda weights")
    if np.any(lambdas <= 0):
        raise ValueError("lambda weights must be positive")
    type_nodes = graph.nodes_of_type
    if mats is None:
        mats = neighbor_matrices(graph)

    targets = np.arange(graph.num_nodes) if nodes is None else np.asarray(nodes)
    target_types = graph.type_of[targets]
    counts = np.bincount(target_types, minlength=graph.num_types)
    if nodes is None and np.any(counts == 0):
        empty = int(np.argmin(counts))
        raise ValueError(f"type {empty} has no nodes but carries weight "
                         f"lambda={lambdas[empty]}")
    coef_by_type = np.zeros(graph.num_types)
    nz = counts > 0
    coef_by_type[nz] = 1.0 / (lambdas[nz] * counts[nz])

    shards = np.array_split(targets, max(1, workers))
    shards = [s for s in shards if len(s)]
    loss = 0.0
    grads = None
    pieces = _map_shards(
        shards, workers,
        lambda rows: _recon_shard(state, graph, mats, type_nodes, rows,
                                  coef_by_type))
    for shard_loss, shard_grads in pieces:               # fixed shard order
        loss += shard_loss
        grads = shard_grads if grads is None else add_grads(grads, shard_grads)
    if grads is None:
        grads = zeros_like_tensors(
            {k: v for k, v in state_tensors(state).items()
             if not k.startswith("head.")})
    return loss, grads


def _map_shards(shards, workers, fn):
    if workers <= 1 or len(shards) <= 1:
        return [fn(rows) for rows in shards]
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, rows) for rows in shards]
        return [f.result() for f in futures]              # shard-index order


def _recon_shard(state, graph, mats, type_nodes, rows, coef_by_type):
    F, cache = aggregate_all(state.agg, state.emb, mats, type_nodes, rows=rows)
    R = state.emb[rows] - F                               # (nr, d)
    cvec = coef_by_type[graph.type_of[rows]]
    loss = float(np.sum(cvec * np.einsum("vd,vd->v", R, R)))
    upstream = -2.0 * cvec[:, None] * R                   # dloss/dF
    grads = aggregate_all_backward(state.agg, state.emb, upstream, cache,
                                   type_nodes)
    grads["emb"][rows] += 2.0 * cvec[:, None] * R         # target-side term
    return loss, grads


def _labeled_matrix(labels, split):
    ids = np.array(sorted(split.labeled), dtype=np.int64)
    if len(ids) == 0:
        raise ValueError("empty labeled set")
    if labels.mode == MULTICLASS:
        y = np.array([labels.labels[v] for v in ids], dtype=np.int64)
    else:
        y = np.stack([np.asarray(labels.labels[v], dtype=float) for v in ids])
    return ids, y


def softmax_head_loss(state: ModelState, labels, split, lambda_w: float):
    """Mean cross-entropy of the softmax head over the labeled set.

    Returns (data_loss, reg_loss, grads); the op value is their sum.
    Logits are stabilized by max subtraction.
    """
    if labels.mode != MULTICLASS:
        raise ValueError("softmax head needs multiclass labels")
    ids, y = _labeled_matrix(labels, split)
    W, b = state.head.W, state.head.b
    if np.any(y >= W.shape[0]):
        raise ValueError("label index exceeds class count")
    E = state.emb[ids]                                    # (n, d)
    logits = E @ W.T + b
    shifted = logits - logits.max(axis=1, keepdims=True)
    logZ = np.log(np.sum(np.exp(shifted), axis=1))
    n = len(ids)
    data = float(np.mean(logZ - shifted[np.arange(n), y]))
    reg = float(lambda_w * np.sum(W * W))

    P = np.exp(shifted - logZ[:, None])
    P[np.arange(n), y] -= 1.0
    dlogits = P / n
    grads = {
        "head.W": dlogits.T @ E + 2.0 * lambda_w * W,
        "head.b": dlogits.sum(axis=0),
        "emb": np.zeros_like(state.emb),
    }
    grads["emb"][ids] = dlogits @ W
    return data, reg, grads


def multilabel_head_loss(state: ModelState, labels, split, lambda_w: float):
    """Mean summed per-label logistic loss log(1+e^z) - y*z over the labeled set.

    Returns (data_loss, reg_loss, grads) like softmax_head_loss.
    """
    if labels.mode != MULTILABEL:
        raise ValueError("logistic multi-label head needs multilabel labels")
    ids, Y = _labeled_matrix(labels, split)
    W, b = state.head.W, state.head.b
    if Y.shape[1] != W.shape[0]:
        raise ValueError("indicator width does not match class count")
    E = state.emb[ids]
    Z = E @ W.T + b
    n = len(ids)
    data = float(np.sum(np.logaddexp(0.0, Z) - Y * Z) / n)
    reg = float(lambda_w * np.sum(W * W))

    dZ = (expit(Z) - Y) / n
    grads = {
        "head.W": dZ.T @ E + 2.0 * lambda_w * W,
        "head.b": dZ.sum(axis=0),
        "emb": np.zeros_like(state.emb),
    }
    grads["emb"][ids] = dZ @ W
    return data, reg, grads


def total_objective(state: ModelState, graph: HeteroGraph, labels, split, *,
                    lambdas, lambda_w, mats=None, nodes=None, workers=1):
    """Reconstruction plus (when labels and a split are given) the head loss.

    Returns (LossBreakdown, grads) with gradients merged additively over the
    full tensor set, zero-filled for any component that is absent.
    """
    recon, grads = reconstruction_loss(state, graph, lambdas, mats=mats,
                                       nodes=nodes, workers=workers)
    full = zeros_like_tensors(state_tensors(state))
    add_grads(full, grads)

    sup = reg = 0.0
    if labels is not None and split is not None:
        use_split = split
        if nodes is not None:
            sub = set(np.asarray(nodes).tolist()) & split.labeled
            if sub:
                use_split = type(split)(labeled=sub, test=split.test,
                                        seed=split.seed,
                                        labeled_fraction=split.labeled_fraction)
            else:
                use_split = None
        if use_split is not None:
            head_fn = (softmax_head_loss if labels.mode == MULTICLASS
                       else multilabel_head_loss)
            sup, reg, hgrads = head_fn(state, labels, use_split, lambda_w)
            add_grads(full, hgrads)
    return make_breakdown(recon, sup, reg), full


def logits_for(state: ModelState, ids) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    return state.emb[ids] @ state.head.W.T + state.head.b


def predict_multiclass(state: ModelState, v: int) -> int:
    """Argmax class of node v; ties break toward the lowest index."""
    if not 0 <= v < state.emb.shape[0]:
        raise IndexError(f"invalid node id {v}")
    return int(np.argmax(logits_for(state, [v])[0]))


def predict_multilabel(state: ModelState, v: int, threshold: float = 0.5) -> np.ndarray:
    """Indicator of labels whose logistic probability reaches the threshold."""
    if not 0 <= v < state.emb.shape[0]:
        raise IndexError(f"invalid node id {v}")
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0,1)")
    return (expit(logits_for(state, [v])[0]) >= threshold).astype(np.int64)
