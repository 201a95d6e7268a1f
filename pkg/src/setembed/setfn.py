"""Partially permutation invariant neighborhood aggregator.

The aggregator maps K groups of column vectors (one group per node type) to a
d-vector and is invariant to reordering columns within any group.  It is the
sum-of-encodings form

    out_m = sum_l c[m,l] * act( sum_k sum_{t,q} w_k[l,t,q] * S_k[t,q] + b[l] )
    S_k[t,q] = sum_n act( u_k[q] * (a_k[t] . x_{k,n}) + v_k[q] )

with a shared squashing activation.  Gradients are hand-derived reverse mode:
exact derivatives of <upstream, forward> with respect to every parameter
tensor and every input column.

Two output wirings exist: the default shares w and b across output
coordinates (c alone is per-coordinate); ``per_coord=True`` gives every
output coordinate its own w and b, i.e. d fully independent scalar networks.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

PERM_GUARD = 10_000


def _act(name):
    if name == "logistic":
        return expit
    if name == "tanh":
        return np.tanh
    raise ValueError(f"unknown activation {name!r}")


def _act_deriv_from_value(name, s):
    """Derivative of the activation expressed through its output value."""
    if name == "logistic":
        return s * (1.0 - s)
    return 1.0 - s * s


@dataclass
class AggParams:
    """Shared aggregator weights for all nodes of a graph.

    Per type k: a[k] is (T_k, d) projection directions, u[k] and v[k] are
    (Q_k,) scalar encoder weights, w[k] mixes encoded sums into the L outer
    units, shape (L, T_k, Q_k) shared or (d, L, T_k, Q_k) per-coordinate.
    c is (d, L); b is (L,) shared or (d, L) per-coordinate.
    """

    num_types: int
    dim: int
    a: list[np.ndarray]
    u: list[np.ndarray]
    v: list[np.ndarray]
    w: list[np.ndarray]
    c: np.ndarray
    b: np.ndarray
    activation: str = "logistic"
    per_coord: bool = False

    @property
    def L(self) -> int:
        return self.c.shape[1]

    def T(self, k: int) -> int:
        return self.a[k].shape[0]

    def Q(self, k: int) -> int:
        return self.u[k].shape[0]

    def validate(self):
        K, d, L = self.num_types, self.dim, self.L
        assert K >= 1 and d >= 1 and L >= 1
        assert len(self.a) == len(self.u) == len(self.v) == len(self.w) == K
        assert self.c.shape == (d, L)
        assert self.b.shape == ((d, L) if self.per_coord else (L,))
        for k in range(K):
            T, Q = self.T(k), self.Q(k)
            assert T >= 1 and Q >= 1
            assert self.a[k].shape == (T, d)
            assert self.u[k].shape == self.v[k].shape == (Q,)
            want = (d, L, T, Q) if self.per_coord else (L, T, Q)
            assert self.w[k].shape == want
        for arr in self.tensors().values():
            assert np.all(np.isfinite(arr)), "non-finite parameter entry"

    def tensors(self) -> dict[str, np.ndarray]:
        """Named views of every parameter array (stable ordering)."""
        out = {}
        for k in range(self.num_types):
            out[f"a{k}"] = self.a[k]
            out[f"u{k}"] = self.u[k]
            out[f"v{k}"] = self.v[k]
            out[f"w{k}"] = self.w[k]
        out["c"] = self.c
        out["b"] = self.b
        return out


@dataclass
class AggGrads:
    """Gradient carrier: one array per parameter plus one per input group."""

    a: list[np.ndarray]
    u: list[np.ndarray]
    v: list[np.ndarray]
    w: list[np.ndarray]
    c: np.ndarray
    b: np.ndarray
    cols: list[np.ndarray]           # dX_k, shape (d, N_k)

    def tensors(self) -> dict[str, np.ndarray]:
        out = {}
        for k in range(len(self.a)):
            out[f"a{k}"] = self.a[k]
            out[f"u{k}"] = self.u[k]
            out[f"v{k}"] = self.v[k]
            out[f"w{k}"] = self.w[k]
        out["c"] = self.c
        out["b"] = self.b
        return out


def _check_bundle(params: AggParams, bundle):
    if len(bundle) != params.num_types:
        raise ValueError(
            f"bundle has {len(bundle)} groups, expected {params.num_types}")
    cols = []
    for k, X in enumerate(bundle):
        X = np.asarray(X, dtype=float)
        if X.size == 0:
            X = X.reshape(params.dim, 0)
        if X.ndim != 2 or X.shape[0] != params.dim:
            raise ValueError(
                f"group {k}: expected shape ({params.dim}, N), got {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError(f"group {k}: non-finite input column")
        cols.append(X)
    return cols


def elem_encode(params: AggParams, k: int, x) -> np.ndarray:
    """Per-element encoding of one column: entry (t,q) = act(u[q]*(a[t].x)+v[q]).

    Returned flattened t-major, length T_k*Q_k.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (params.dim,):
        raise ValueError(f"expected vector of length {params.dim}, got {x.shape}")
    act = _act(params.activation)
    z = params.a[k] @ x                                   # (T,)
    pre = params.u[k][None, :] * z[:, None] + params.v[k][None, :]
    return act(pre).reshape(-1)


def _forward_pass(params: AggParams, cols):
    """Shared forward computation; returns output and every intermediate."""
    act = _act(params.activation)
    Z, G, S = [], [], []
    for k, X in enumerate(cols):
        z = params.a[k] @ X                               # (T, N)
        pre = params.u[k][None, :, None] * z[:, None, :] + params.v[k][None, :, None]
        g = act(pre)                                      # (T, Q, N)
        Z.append(z)
        G.append(g)
        S.append(g.sum(axis=2) if g.shape[2] else np.zeros(g.shape[:2]))
    if params.per_coord:
        H = params.b.copy()                               # (d, L)
        for k in range(params.num_types):
            H += np.tensordot(params.w[k], S[k], axes=([2, 3], [0, 1]))
        A = act(H)
        out = (params.c * A).sum(axis=1)
    else:
        H = params.b.copy()                               # (L,)
        for k in range(params.num_types):
            H += np.tensordot(params.w[k], S[k], axes=([1, 2], [0, 1]))
        A = act(H)
        out = params.c @ A
    return out, Z, G, S, A


def forward(params: AggParams, bundle) -> np.ndarray:
    """Aggregate one neighborhood bundle into a d-vector.

    ``bundle`` is a sequence of K matrices with d rows; empty groups are
    allowed and contribute nothing to the inner sums.  The result depends
    only on the multiset of columns within each group.
    """
    cols = _check_bundle(params, bundle)
    out, *_ = _forward_pass(params, cols)
    return out


def backward(params: AggParams, bundle, upstream) -> AggGrads:
    """Gradient of <upstream, forward(params, bundle)> w.r.t. params and columns."""
    cols = _check_bundle(params, bundle)
    upstream = np.asarray(upstream, dtype=float)
    if upstream.shape != (params.dim,):
        raise ValueError(
            f"upstream must have shape ({params.dim},), got {upstream.shape}")
    _, Z, G, S, A = _forward_pass(params, cols)
    dact = _act_deriv_from_value

    if params.per_coord:
        dA = upstream[:, None] * params.c                 # (d, L)
        dc = upstream[:, None] * A
        dH = dA * dact(params.activation, A)
        db = dH
        dw = [np.einsum("dl,tq->dltq", dH, S[k]) for k in range(params.num_types)]
        dS = [np.tensordot(dH, params.w[k], axes=([0, 1], [0, 1]))
              for k in range(params.num_types)]
    else:
        dA = params.c.T @ upstream                        # (L,)
        dc = np.outer(upstream, A)
        dH = dA * dact(params.activation, A)
        db = dH
        dw = [dH[:, None, None] * S[k][None, :, :] for k in range(params.num_types)]
        dS = [np.tensordot(dH, params.w[k], axes=(0, 0))
              for k in range(params.num_types)]

    da, du, dv, dcols = [], [], [], []
    for k in range(params.num_types):
        dpre = dS[k][:, :, None] * dact(params.activation, G[k])   # (T, Q, N)
        du.append(np.einsum("tqn,tn->q", dpre, Z[k]))
        dv.append(dpre.sum(axis=(0, 2)))
        dZ = np.einsum("tqn,q->tn", dpre, params.u[k])
        da.append(dZ @ cols[k].T)
        dcols.append(params.a[k].T @ dZ)
    return AggGrads(a=da, u=du, v=dv, w=dw, c=dc, b=db, cols=dcols)


def symmetrize(fn, bundle):
    """Average ``fn`` over every within-group column permutation of the bundle.

    Exact invariant-by-construction reference; cost is the product of the
    group-size factorials, guarded at 10,000 terms.  ``fn`` may return a
    scalar or an ndarray (averaged element-wise).  Invariant functions are
    fixed points of this averaging.
    """
    cols = [np.asarray(X, dtype=float) for X in bundle]
    sizes = [X.shape[1] if X.ndim == 2 else 0 for X in cols]
    n_terms = math.prod(math.factorial(n) for n in sizes)
    if n_terms > PERM_GUARD:
        raise ValueError(f"{n_terms} permutations exceed guard of {PERM_GUARD}")
    total = 0.0
    for perms in itertools.product(*(itertools.permutations(range(n)) for n in sizes)):
        permuted = [X[:, list(p)] if X.ndim == 2 and X.shape[1] else X
                    for X, p in zip(cols, perms)]
        total += fn(permuted)
    return total / n_terms


def smooth_max(values, sharpness: float) -> float:
    """Softmax-weighted average sum(e^{k x} x)/sum(e^{k x}); -> max as k grows.

    Computed with max subtraction so large sharpness cannot overflow.
    """
    vals = np.asarray(values, dtype=float)
    if vals.size == 0:
        raise ValueError("smooth_max of an empty list")
    if not np.isfinite(sharpness):
        raise ValueError("sharpness must be finite")
    m = vals.max()
    if np.all(vals == m):
        return float(m)
    e = np.exp(sharpness * (vals - m))
    return float(np.sum(e * vals) / np.sum(e))


def init_params(num_types: int, dim: int, L: int, T, Q, seed: int,
                activation: str = "logistic", per_coord: bool = False) -> AggParams:
    """Seeded uniform initialization.

    a ~ U(-1/sqrt(d), 1/sqrt(d)); u, v ~ U(-0.5, 0.5);
    w ~ U(-s, s) with s = 1/sqrt(sum_k T_k Q_k); c ~ U(-1/sqrt(L), 1/sqrt(L));
    b starts at zero.  T and Q may be ints (same for all types) or lists.
    """
    Ts = [T] * num_types if np.isscalar(T) else list(T)
    Qs = [Q] * num_types if np.isscalar(Q) else list(Q)
    if num_types < 1 or dim < 1 or L < 1 or min(Ts) < 1 or min(Qs) < 1:
        raise ValueError("all widths must be positive")
    rng = np.random.default_rng(np.uint64(seed))
    s_w = 1.0 / math.sqrt(sum(t * q for t, q in zip(Ts, Qs)))
    a, u, v, w = [], [], [], []
    for k in range(num_types):
        a.append(rng.uniform(-1 / math.sqrt(dim), 1 / math.sqrt(dim), (Ts[k], dim)))
        u.append(rng.uniform(-0.5, 0.5, Qs[k]))
        v.append(rng.uniform(-0.5, 0.5, Qs[k]))
    for k in range(num_types):
        shape = (dim, L, Ts[k], Qs[k]) if per_coord else (L, Ts[k], Qs[k])
        w.append(rng.uniform(-s_w, s_w, shape))
    c = rng.uniform(-1 / math.sqrt(L), 1 / math.sqrt(L), (dim, L))
    b = np.zeros((dim, L)) if per_coord else np.zeros(L)
    params = AggParams(num_types=num_types, dim=dim, a=a, u=u, v=v, w=w,
                       c=c, b=b, activation=activation, per_coord=per_coord)
    params.validate()
    return params
