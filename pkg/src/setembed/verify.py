"""Randomized self-checks for the aggregation core.

Four properties are exercised: column-order invariance, analytic-gradient
agreement with central finite differences, agreement with the brute-force
permutation-averaging oracle, and the smooth-max error decay.  A synthetic
power-sum regression (`fit_power_sum`) probes expressiveness end to end.
Failing random instances can be dumped to .npz files and replayed.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .optim import AdamState, adam_step
from .setfn import (AggParams, backward, forward, init_params, smooth_max,
                    symmetrize)

SMOOTH_MAX_123_K10 = 2.9999546        # smooth_max([1,2,3], 10), closed form


@dataclass
class CheckResult:
    name: str
    passed: bool
    trials: int
    max_err: float
    seconds: float
    detail: str = ""
    dumps: list = field(default_factory=list)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return (f"[{status}] {self.name}: trials={self.trials} "
                f"max_err={self.max_err:.3e} time={self.seconds:.2f}s{extra}")


def _random_params(rng, K, d, L, T, Q, per_coord=False) -> AggParams:
    return init_params(K, d, L, T, Q, seed=int(rng.integers(0, 2**63)),
                       per_coord=per_coord)


def _random_bundle(rng, K, d, max_n, min_n=0):
    return [rng.uniform(-1.5, 1.5, (d, int(rng.integers(min_n, max_n + 1))))
            for _ in range(K)]


def _dump_instance(dump_dir, tag, idx, params: AggParams, bundle, extra=None):
    if dump_dir is None:
        return None
    meta = {"num_types": params.num_types, "dim": params.dim,
            "activation": params.activation, "per_coord": params.per_coord}
    if extra:
        meta.update(extra)
    payload = {f"param_{n}": v for n, v in params.tensors().items()}
    for k, X in enumerate(bundle):
        payload[f"group_{k}"] = np.asarray(X, dtype=float)
    payload["meta_json"] = np.frombuffer(json.dumps(meta).encode(), np.uint8)
    Path(dump_dir).mkdir(parents=True, exist_ok=True)
    path = Path(dump_dir) / f"{tag}_{idx}.npz"
    np.savez(path, **payload)
    return str(path)


def load_instance(path):
    """Rebuild (params, bundle) from a failure dump for replay."""
    data = np.load(path, allow_pickle=False)
    meta = json.loads(data["meta_json"].tobytes().decode())
    K = meta["num_types"]
    params = AggParams(
        num_types=K, dim=meta["dim"],
        a=[data[f"param_a{k}"] for k in range(K)],
        u=[data[f"param_u{k}"] for k in range(K)],
        v=[data[f"param_v{k}"] for k in range(K)],
        w=[data[f"param_w{k}"] for k in range(K)],
        c=data["param_c"], b=data["param_b"],
        activation=meta["activation"], per_coord=meta["per_coord"])
    bundle = [data[f"group_{k}"] for k in range(K)]
    return params, bundle


def check_invariance(trials: int = 1000, seed: int = 0, tol: float = 1e-10,
                     forward_fn=None, dump_dir=None) -> CheckResult:
    """Aggregation output must not change when columns are shuffled per group.

    ``forward_fn`` is injectable so a deliberately order-sensitive function
    can serve as a negative control.
    """
    fn = forward_fn or forward
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    max_err, dumps = 0.0, []
    for i in range(trials):
        K = int(rng.integers(1, 4))
        d = int(rng.integers(1, 5))
        L, T, Q = (int(x) for x in rng.integers(1, 4, 3))
        params = _random_params(rng, K, d, L, T, Q,
                                per_coord=bool(rng.integers(0, 2)))
        bundle = _random_bundle(rng, K, d, max_n=6)
        shuffled = [X[:, rng.permutation(X.shape[1])] for X in bundle]
        y0, y1 = fn(params, bundle), fn(params, shuffled)
        err = float(np.max(np.abs(y0 - y1) / np.maximum(1.0, np.abs(y0))))
        if err > max_err:
            max_err = err
        if err > tol:
            dumps.append(_dump_instance(dump_dir, "invariance", i, params,
                                        bundle, {"err": err}))
    return CheckResult("invariance", max_err <= tol, trials, max_err,
                       time.perf_counter() - t0, dumps=[d for d in dumps if d])


def check_gradients(trials: int = 200, seed: int = 0, tol: float = 1e-5,
                    step: float = 1e-6, dump_dir=None) -> CheckResult:
    """Analytic backward vs central finite differences, every coordinate."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    max_err, dumps = 0.0, []
    for i in range(trials):
        K = int(rng.integers(1, 3))
        d = int(rng.integers(1, 4))
        L, T, Q = (int(x) for x in rng.integers(1, 4, 3))
        params = _random_params(rng, K, d, L, T, Q,
                                per_coord=bool(rng.integers(0, 2)))
        bundle = _random_bundle(rng, K, d, max_n=3)
        upstream = rng.standard_normal(d)
        grads = backward(params, bundle, upstream)
        analytic = dict(grads.tensors())
        targets = dict(params.tensors())
        for k in range(K):
            analytic[f"x{k}"] = grads.cols[k]
            targets[f"x{k}"] = bundle[k]
        worst = 0.0
        for name, arr in targets.items():
            flat, gflat = arr.reshape(-1), analytic[name].reshape(-1)
            for j in range(flat.size):
                saved = flat[j]
                flat[j] = saved + step
                up = float(upstream @ forward(params, bundle))
                flat[j] = saved - step
                down = float(upstream @ forward(params, bundle))
                flat[j] = saved
                fd = (up - down) / (2 * step)
                a = float(gflat[j])
                err = abs(a - fd) / max(1.0, abs(a), abs(fd))
                if err > worst:
                    worst = err
        if worst > max_err:
            max_err = worst
        if worst > tol:
            dumps.append(_dump_instance(dump_dir, "gradient", i, params,
                                        bundle, {"err": worst}))
    return CheckResult("gradients", max_err <= tol, trials, max_err,
                       time.perf_counter() - t0, dumps=[d for d in dumps if d])


def check_oracle(trials: int = 100, seed: int = 0, tol: float = 1e-10,
                 perm_budget: int = 720, dump_dir=None) -> CheckResult:
    """The aggregation must be a fixed point of permutation averaging."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    max_err, dumps = 0.0, []
    for i in range(trials):
        K = int(rng.integers(1, 4))
        d = int(rng.integers(1, 4))
        L, T, Q = (int(x) for x in rng.integers(1, 4, 3))
        params = _random_params(rng, K, d, L, T, Q,
                                per_coord=bool(rng.integers(0, 2)))
        while True:
            bundle = _random_bundle(rng, K, d, max_n=6)
            terms = math.prod(math.factorial(X.shape[1]) for X in bundle)
            if terms <= perm_budget:
                break
        y = forward(params, bundle)
        avg = symmetrize(lambda b: forward(params, b), bundle)
        err = float(np.max(np.abs(y - avg) / np.maximum(1.0, np.abs(y))))
        if err > max_err:
            max_err = err
        if err > tol:
            dumps.append(_dump_instance(dump_dir, "oracle", i, params,
                                        bundle, {"err": err}))
    return CheckResult("oracle-fixed-point", max_err <= tol, trials, max_err,
                       time.perf_counter() - t0, dumps=[d for d in dumps if d])


def check_smoothmax(seed: int = 0, lists: int = 50) -> CheckResult:
    """Frozen value at sharpness 10 plus strict error decay in sharpness."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    value_err = abs(smooth_max([1.0, 2.0, 3.0], 10.0) - SMOOTH_MAX_123_K10)
    monotone_ok = 0
    for _ in range(lists):
        while True:
            vals = rng.uniform(0.0, 1.0, int(rng.integers(2, 11)))
            if np.unique(vals).size == vals.size:
                break
        errors = [vals.max() - smooth_max(vals, k) for k in (1, 2, 5, 10, 20)]
        if all(b < a for a, b in zip(errors, errors[1:])):
            monotone_ok += 1
    passed = value_err <= 1e-6 and monotone_ok == lists
    return CheckResult("smooth-max", passed, lists, float(value_err),
                       time.perf_counter() - t0,
                       detail=f"monotone {monotone_ok}/{lists}")


def run_all(seed: int = 0, dump_dir=None) -> list[CheckResult]:
    return [
        check_invariance(seed=seed, dump_dir=dump_dir),
        check_gradients(seed=seed, dump_dir=dump_dir),
        check_oracle(seed=seed, dump_dir=dump_dir),
        check_smoothmax(seed=seed),
    ]


# --- synthetic expressiveness fit -----------------------------------------

def _power_sum_data(rng, count: int, max_n: int = 4):
    """Bundles of two groups in R^2 with target sum(p.x)^2 + sum(p.x).

    Returns (groups, targets): groups[k] = (columns, segment starts, segment
    lengths) flattened across all bundles for batched evaluation.
    """
    proj = np.array([0.8, -0.6])
    groups, y = [], np.zeros(count)
    for k in range(2):
        lens = rng.integers(1, max_n + 1, count)
        starts = np.zeros(count, dtype=np.int64)
        starts[1:] = np.cumsum(lens)[:-1]
        X = rng.uniform(-1.0, 1.0, (2, int(lens.sum())))
        groups.append((X, starts, lens))
        z = proj @ X
        y += np.add.reduceat(z**2 if k == 0 else z, starts)
    return groups, y


def _ps_chunks(groups, y, parts: int):
    """Split flattened bundles into contiguous minibatch chunks."""
    out, count = [], y.size
    bounds = [count * i // parts for i in range(parts + 1)]
    for i in range(parts):
        s, e = bounds[i], bounds[i + 1]
        gs = []
        for X, starts, lens in groups:
            cs = int(starts[s])
            ce = int(starts[e]) if e < count else X.shape[1]
            gs.append((X[:, cs:ce], starts[s:e] - cs, lens[s:e]))
        out.append((gs, y[s:e]))
    return out


def _ps_forward(p, groups, width: int):
    L = T = Q = width
    S, caches = [], []
    for k in range(2):
        X, starts, lens = groups[k]
        Z = p[f"a{k}"] @ X
        G = expit(p[f"u{k}"][None, :, None] * Z[:, None, :]
                  + p[f"v{k}"][None, :, None])
        S.append(np.add.reduceat(G, starts, axis=2))
        caches.append((X, lens, Z, G))
    count = S[0].shape[2]
    H = p["w0"].reshape(L, T * Q) @ S[0].reshape(T * Q, count)
    H += p["w1"].reshape(L, T * Q) @ S[1].reshape(T * Q, count)
    A = expit(H + p["b"][:, None])
    return p["c"] @ A, (S, caches, A)


def _ps_backward(p, cache, dout, width: int):
    L = T = Q = width
    S, caches, A = cache
    count = A.shape[1]
    g = {"c": A @ dout}
    dH = (p["c"][:, None] * dout[None, :]) * A * (1.0 - A)
    g["b"] = dH.sum(axis=1)
    for k in range(2):
        X, lens, Z, G = caches[k]
        g[f"w{k}"] = (dH @ S[k].reshape(T * Q, count).T).reshape(L, T, Q)
        dS = p[f"w{k}"].reshape(L, T * Q).T @ dH
        flat = G.reshape(T * Q, -1)
        dpre = np.repeat(dS, lens, axis=1)
        dpre *= flat
        dpre *= 1.0 - flat
        by_q = np.ascontiguousarray(
            dpre.reshape(T, Q, -1).transpose(1, 0, 2)).reshape(Q, -1)
        g[f"u{k}"] = by_q @ Z.reshape(-1)
        g[f"v{k}"] = by_q.sum(axis=1)
        g[f"a{k}"] = (p[f"u{k}"] @ by_q).reshape(Z.shape) @ X.T
    return g


def fit_power_sum(width: int = 16, train_count: int = 1024,
                  test_count: int = 512, seed: int = 0,
                  max_epochs: int = 20000, alpha: float = 5e-3,
                  minibatches: int = 8, target_mse: float = 1e-3,
                  time_limit: float | None = None):
    """Regress the aggregation core onto the power-sum target with Adam.

    A scalar readout over L hidden units is trained on fixed contiguous
    minibatches; returns (held-out MSE, epochs run, wall seconds).  Training
    stops early once the held-out error is safely below ``target_mse``.
    """
    rng = np.random.default_rng(seed)
    train_groups, y_tr = _power_sum_data(rng, train_count)
    test_groups, y_te = _power_sum_data(rng, test_count)
    chunks = _ps_chunks(train_groups, y_tr, minibatches)
    L = T = Q = width
    scale_w = 1.0 / math.sqrt(2 * T * Q)
    p = {"b": np.zeros(L), "c": rng.uniform(-1.0, 1.0, L)}
    for k in range(2):
        p[f"a{k}"] = rng.uniform(-1.0, 1.0, (T, 2)) / math.sqrt(2.0)
        p[f"u{k}"] = rng.uniform(-2.0, 2.0, Q)
        p[f"v{k}"] = rng.uniform(-2.0, 2.0, Q)
        p[f"w{k}"] = rng.uniform(-scale_w, scale_w, (L, T, Q))
    adam = AdamState.for_params(p, alpha=alpha)
    t0 = time.perf_counter()
    test_mse = math.inf
    epoch = 0
    for epoch in range(1, max_epochs + 1):
        for chunk_groups, chunk_y in chunks:
            out, cache = _ps_forward(p, chunk_groups, width)
            resid = out - chunk_y
            grads = _ps_backward(p, cache, 2.0 * resid / resid.size, width)
            adam_step(adam, p, grads)
        if epoch % 100 == 0 or epoch == max_epochs:
            pred, _ = _ps_forward(p, test_groups, width)
            test_mse = float(np.mean((pred - y_te) ** 2))
            if test_mse < 0.6 * target_mse:
                break
            if time_limit is not None and time.perf_counter() - t0 > time_limit:
                break
    return test_mse, epoch, time.perf_counter() - t0
