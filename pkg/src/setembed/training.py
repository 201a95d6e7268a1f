"""Training loop, classification metrics, label-ratio sweeps, and exports."""

from __future__ import annotations

import hashlib
import logging
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import checkpoint as ckpt
from .graphdata import (MULTICLASS, MULTILABEL, DataSplit, HeteroGraph,
                        LabelTable, make_split)
from .model import (HeadParams, LossBreakdown, ModelState, logits_for,
                    make_breakdown, neighbor_matrices, state_tensors,
                    total_objective)
from .optim import AdamState, adam_step
from .setfn import init_params
from scipy.special import expit

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
FULL_BATCH_LIMIT = 20_000        # above this many nodes, default to minibatching
DEFAULT_MINIBATCH = 256


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    """All training knobs; ``None`` fields resolve from graph/label shape.

    Width defaults are (L, T, Q) = (16, 32, 16) for homogeneous graphs and
    (8, 16, 8) for typed graphs; lambda defaults are [0.005] for one type and
    [0.2, 200] for two; the head regularizer defaults to 1e-3 (multiclass)
    or 1e-4 (multilabel).
    """

    dim: int = 64
    L: int | None = None
    T: int | None = None
    Q: int | None = None
    lambdas: list[float] | None = None
    lambda_w: float | None = None
    epochs: int = 300
    batch_size: int | None = None        # None = full batch up to 20K nodes
    neighbor_cap: int | None = 128
    seed: int = 0
    alpha: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    activation: str = "logistic"
    per_coord: bool = False
    workers: int = 1

    def resolved(self, graph: HeteroGraph, labels: LabelTable | None) -> "TrainConfig":
        K = graph.num_types
        cfg = replace(self)
        if cfg.L is None:
            cfg.L = 16 if K == 1 else 8
        if cfg.T is None:
            cfg.T = 32 if K == 1 else 16
        if cfg.Q is None:
            cfg.Q = 16 if K == 1 else 8
        if cfg.lambdas is None:
            if K == 1:
                cfg.lambdas = [0.005]
            elif K == 2:
                cfg.lambdas = [0.2, 200.0]
            else:
                raise ValueError("no default lambdas for K>2; set them explicitly")
        if len(cfg.lambdas) != K:
            raise ValueError(f"need {K} lambda weights, got {len(cfg.lambdas)}")
        if cfg.lambda_w is None:
            cfg.lambda_w = 1e-4 if (labels and labels.mode == MULTILABEL) else 1e-3
        if cfg.batch_size is None and graph.num_nodes > FULL_BATCH_LIMIT:
            cfg.batch_size = DEFAULT_MINIBATCH
        if cfg.dim < 1 or cfg.epochs < 1 or cfg.L < 1 or cfg.T < 1 or cfg.Q < 1:
            raise ValueError("dimensions and epochs must be positive")
        return cfg

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _rng_streams(seed: int):
    """Named child seeds so split/init/sampling streams stay independent."""
    state = np.random.SeedSequence(seed).generate_state(4, dtype=np.uint64)
    return {"split": int(state[0]), "embed": int(state[1]),
            "agg": int(state[2]), "sample": int(state[3])}


def split_seed(seed: int) -> int:
    """The named sub-stream a top-level seed dedicates to split drawing."""
    return _rng_streams(seed)["split"]


# Warm-start constants.  The aggregator begins life as an approximate
# neighborhood-averaging map (unit gain on a random preserved subspace),
# classifier rows are orthogonal directions inside that subspace, labeled
# embeddings start on their class direction at ANCHOR_NORM, and unlabeled
# embeddings relax to damped neighbor means.  Keeping embeddings at O(1)
# norm matters: Adam moves every coordinate about ``alpha`` per step no
# matter its size, so structure stored at tiny scales is jittered away.
ANCHOR_NORM = 2.0
HEAD_ROW_NORM = 3.0
GATE_BIAS = -2.0           # resting unit output sigma(-2)~0.12: a bundle's
                           # column count then barely moves the sums, which
                           # keeps that stiff direction out of Adam's way
SLOPE_SCALE = 0.24         # inner slope u; sized so sigma'(GATE_BIAS)*u
                           # matches a 0.025 linear gain with u*(a.x) still
                           # inside the sigmoid's linear range
RELAX_ITERS = 100
RELAX_DAMPING = 0.5


def _mean_bundle_size(graph: HeteroGraph, cap: int | None) -> float:
    sizes = np.fromiter((graph.degree(v) for v in range(graph.num_nodes)),
                        float, count=graph.num_nodes)
    if cap is not None:
        sizes = np.minimum(sizes, cap)
    mean = float(sizes.mean()) if graph.num_nodes else 0.0
    return max(mean, 1.0)


def _averaging_aggregator(cfg: TrainConfig, graph: HeteroGraph, rng, nbar):
    """Aggregator whose linearization is ~(1/nbar) x projection onto a
    random (L-1)-dim subspace, so a forward pass approximates the mean of
    the neighbor columns there.  Returns (params, subspace basis)."""
    d, L = cfg.dim, cfg.L
    K = graph.num_types
    a, u, v, w = [], [], [], []
    basis = None
    mix0 = None
    for k in range(K):
        a_k = rng.uniform(-1.0 / np.sqrt(d), 1.0 / np.sqrt(d), (cfg.T, d))
        u_k = SLOPE_SCALE * np.where(np.arange(cfg.Q) % 2 == 0, 1.0, -1.0)
        if basis is None:
            mix0 = rng.normal(0.0, 1.0, (L, cfg.T))
            mix0 -= mix0.mean(axis=0, keepdims=True)
            mix, basis = mix0, mix0 @ a_k
        else:
            # reuse the first type's subspace: solve mix @ a_k ~ basis
            mix = np.linalg.lstsq(a_k.T, basis.T, rcond=None)[0].T
            mix -= mix.mean(axis=0, keepdims=True)
        # paired +/- slope channels: the column-count contribution cancels,
        # leaving only the summed linear response
        w_k = mix[:, :, None] * (np.sign(u_k)[None, None, :] / cfg.Q)
        a.append(a_k)
        u.append(u_k)
        v.append(np.full(cfg.Q, GATE_BIAS))
        w.append(w_k)
    c = np.linalg.pinv(basis)          # rescaled by the calibration probe
    from .setfn import AggParams

    agg = AggParams(num_types=K, dim=d, a=a, u=u, v=v, w=w, c=c,
                    b=np.zeros(L), activation=cfg.activation,
                    per_coord=cfg.per_coord)
    return agg, basis


def _calibrate_gain(agg, probe_dir, nbar) -> None:
    """Scale the output weights so a bundle of nbar identical columns at
    operating amplitude maps to its own mean (measured, not linearized,
    so sigmoid saturation is absorbed)."""
    from .setfn import forward

    ncol = max(int(round(nbar)), 1)
    per_type = [max(ncol // agg.num_types, 1)] * agg.num_types
    bundle = [np.tile(ANCHOR_NORM * probe_dir, (n_k, 1)).T for n_k in per_type]
    resp = float(forward(agg, bundle) @ probe_dir)
    target = ANCHOR_NORM * sum(per_type) / nbar
    if abs(resp) > 1e-12:
        agg.c *= target / resp


def _relax_unlabeled(emb, graph, labeled_ids, nbar) -> None:
    """Damped Jacobi passes of x_v <- sum(neighbors)/nbar with labeled
    rows clamped; unlabeled rows converge toward the aggregator's
    reconstruction fixed point."""
    n = graph.num_nodes
    counts = np.zeros(n, dtype=np.intp)
    flat: list[np.ndarray] = []
    for v in range(n):
        merged = [u for lst in graph.adjacency[v] for u in lst]
        nbrs = np.asarray(merged, dtype=np.intp)
        counts[v] = len(nbrs)
        flat.append(nbrs)
    idx = np.concatenate(flat) if flat else np.empty(0, dtype=np.intp)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    free = np.array([v for v in range(n) if v not in labeled_ids], dtype=np.intp)
    if not len(free) or not len(idx):
        return
    clamp = 10.0 * ANCHOR_NORM
    # reduceat only over non-empty segments: a zero-count start (possibly
    # equal to len(idx) for trailing isolated nodes) is not a valid boundary
    nonzero = np.flatnonzero(counts > 0)
    starts = offsets[:-1][nonzero]
    for _ in range(RELAX_ITERS):
        gathered = emb[idx]
        sums = np.zeros_like(emb)
        sums[nonzero] = np.add.reduceat(gathered, starts, axis=0)
        target = sums[free] / nbar
        emb[free] = (1.0 - RELAX_DAMPING) * emb[free] + RELAX_DAMPING * target
        norms = np.linalg.norm(emb[free], axis=1)
        big = norms > clamp
        if np.any(big):
            emb[free[big]] *= (clamp / norms[big])[:, None]


def init_state(cfg: TrainConfig, graph: HeteroGraph,
               labels: LabelTable | None,
               split: DataSplit | None = None) -> ModelState:
    """Build the warm-started model state.

    Without labels (or with the per-coordinate wiring, whose contraction
    the averaging construction does not cover) this falls back to small
    uniform embeddings and generic random aggregator weights.
    """
    streams = _rng_streams(cfg.seed)
    emb_rng = np.random.default_rng(np.uint64(streams["embed"]))
    agg_rng = np.random.default_rng(np.uint64(streams["agg"]))
    n, d = graph.num_nodes, cfg.dim

    if cfg.per_coord:
        scale = 1.0 / np.sqrt(d)
        emb = emb_rng.uniform(-scale, scale, (n, d))
        agg = init_params(graph.num_types, d, cfg.L, cfg.T, cfg.Q,
                          seed=streams["agg"], activation=cfg.activation,
                          per_coord=True)
        head = None
        if labels is not None:
            head = HeadParams(W=np.zeros((labels.num_classes, d)),
                              b=np.zeros(labels.num_classes))
        return ModelState(emb=emb, agg=agg, head=head)

    nbar = _mean_bundle_size(graph, cfg.neighbor_cap)
    agg, basis = _averaging_aggregator(cfg, graph, agg_rng, nbar)

    head = None
    head_dirs = None
    if labels is not None:
        C = labels.num_classes
        mix = agg_rng.normal(0.0, 1.0, (C, cfg.L))
        q_mat, _ = np.linalg.qr((mix @ basis).T)
        head_dirs = q_mat[:, :C].T                 # orthonormal, inside basis
        head = HeadParams(W=HEAD_ROW_NORM * head_dirs.copy(),
                          b=np.zeros(C))

    if head_dirs is not None:
        probe_dir = head_dirs[0]
    else:
        raw = agg_rng.normal(0.0, 1.0, d) @ np.linalg.pinv(basis) @ basis
        norm = np.linalg.norm(raw)
        probe_dir = raw / norm if norm > 0 else np.eye(d)[0]
    _calibrate_gain(agg, probe_dir, nbar)

    emb = np.zeros((n, d))
    if labels is not None and split is not None and head_dirs is not None:
        for v in sorted(split.labeled):
            lab = labels.labels[v]
            if labels.mode == MULTICLASS:
                direction = head_dirs[int(lab)]
            else:
                on = np.flatnonzero(np.asarray(lab) > 0)
                if not len(on):
                    continue
                direction = head_dirs[on].mean(axis=0)
                nrm = np.linalg.norm(direction)
                if nrm == 0.0:
                    continue
                direction = direction / nrm
            emb[v] = ANCHOR_NORM * direction
        _relax_unlabeled(emb, graph, split.labeled, nbar)
    else:
        scale = 1.0 / np.sqrt(d)
        emb = emb_rng.uniform(-scale, scale, (n, d))
    return ModelState(emb=emb, agg=agg, head=head)


def train(config: TrainConfig, graph: HeteroGraph, labels: LabelTable | None,
          split: DataSplit | None):
    """Joint gradient training of embeddings, aggregator, and head.

    Runs ``epochs`` rounds of objective evaluation + Adam updates and returns
    (final state, per-epoch LossBreakdown history).  Deterministic for a
    fixed seed and worker count; aborts with TrainingDiverged if the loss
    leaves the finite range.
    """
    state, history, _ = train_full(config, graph, labels, split)
    return state, history


def train_full(config: TrainConfig, graph: HeteroGraph,
               labels: LabelTable | None, split: DataSplit | None):
    """Like train() but also returns the optimizer state for checkpointing."""
    cfg = config.resolved(graph, labels)
    state = init_state(cfg, graph, labels, split)
    params = state_tensors(state)
    adam = AdamState.for_params(params, alpha=cfg.alpha, beta1=cfg.beta1,
                                beta2=cfg.beta2, eps=cfg.eps)
    sample_rng = np.random.default_rng(np.uint64(_rng_streams(cfg.seed)["sample"]))

    max_deg = max((len(lst) for adj in graph.adjacency for lst in adj), default=0)
    static_mats = None
    if cfg.neighbor_cap is None or max_deg <= cfg.neighbor_cap:
        static_mats = neighbor_matrices(graph)

    val_ids = None
    if labels is not None and split is not None:
        lab_sorted = sorted(split.labeled)
        n_val = max(1, len(lab_sorted) // 10)
        val_ids = lab_sorted[:n_val]

    history: list[LossBreakdown] = []
    n = graph.num_nodes
    for epoch in range(cfg.epochs):
        mats = static_mats
        if mats is None:
            mats = neighbor_matrices(graph, cap=cfg.neighbor_cap, rng=sample_rng)
        if cfg.batch_size is None:
            lb, grads = total_objective(state, graph, labels, split,
                                        lambdas=cfg.lambdas,
                                        lambda_w=cfg.lambda_w, mats=mats,
                                        workers=cfg.workers)
            _guard(lb, epoch)
            adam_step(adam, params, grads)
            history.append(lb)
        else:
            perm = sample_rng.permutation(n)
            parts = []
            for start in range(0, n, cfg.batch_size):
                batch = np.sort(perm[start:start + cfg.batch_size])
                lb, grads = total_objective(state, graph, labels, split,
                                            lambdas=cfg.lambdas,
                                            lambda_w=cfg.lambda_w, mats=mats,
                                            nodes=batch, workers=cfg.workers)
                _guard(lb, epoch)
                adam_step(adam, params, grads)
                parts.append(lb)
            history.append(make_breakdown(
                float(np.mean([p.reconstruction for p in parts])),
                float(np.mean([p.supervised for p in parts])),
                float(np.mean([p.regularization for p in parts]))))
        if val_ids and (epoch + 1) % 10 == 0:
            acc = _quick_val(state, labels, val_ids)
            log.debug("epoch %d: total=%.6f val=%.3f", epoch,
                      history[-1].total, acc)
    return state, history, adam


def _guard(lb: LossBreakdown, epoch: int):
    if not np.isfinite(lb.total):
        raise TrainingDiverged(f"non-finite total loss at epoch {epoch}")


def _quick_val(state, labels, ids):
    logits = logits_for(state, ids)
    if labels.mode == MULTICLASS:
        pred = logits.argmax(axis=1)
        truth = np.array([labels.labels[v] for v in ids])
        return float(np.mean(pred == truth))
    pred = (expit(logits) >= 0.5)
    truth = np.stack([labels.labels[v] for v in ids])
    return float(np.mean(pred == (truth > 0)))


def accuracy(predictions, truth) -> float:
    """Exact-match fraction over aligned node-id maps."""
    if not truth:
        raise ValueError("empty test set")
    if set(predictions) != set(truth):
        raise ValueError("prediction and truth id sets differ")
    hits = sum(1 for v in truth if predictions[v] == truth[v])
    return hits / len(truth)


def f1_scores(pred_ind, true_ind):
    """(macro_f1, micro_f1) from indicator matrices of shape (n, C).

    A label with an empty confusion row (no predicted and no true positives)
    contributes F1 = 0 to the macro average.
    """
    P = np.asarray(pred_ind)
    Y = np.asarray(true_ind)
    if P.shape != Y.shape or P.ndim != 2:
        raise ValueError(f"indicator shape mismatch: {P.shape} vs {Y.shape}")
    tp = np.sum((P == 1) & (Y == 1), axis=0).astype(float)
    fp = np.sum((P == 1) & (Y == 0), axis=0).astype(float)
    fn = np.sum((P == 0) & (Y == 1), axis=0).astype(float)
    denom = 2 * tp + fp + fn
    per_label = np.divide(2 * tp, denom, out=np.zeros_like(tp),
                          where=denom > 0)
    macro = float(per_label.mean())
    pooled = 2 * tp.sum() + fp.sum() + fn.sum()
    micro = float(2 * tp.sum() / pooled) if pooled > 0 else 0.0
    return macro, micro


def evaluate(state: ModelState, labels: LabelTable, split: DataSplit,
             threshold: float = 0.5) -> dict[str, float]:
    """Held-out metrics: accuracy (multiclass) or macro/micro F1 (multilabel)."""
    ids = sorted(split.test)
    if not ids:
        raise ValueError("empty test set")
    logits = logits_for(state, ids)
    if labels.mode == MULTICLASS:
        pred = {v: int(c) for v, c in zip(ids, logits.argmax(axis=1))}
        truth = {v: int(labels.labels[v]) for v in ids}
        return {"accuracy": accuracy(pred, truth)}
    P = (expit(logits) >= threshold).astype(int)
    Y = np.stack([labels.labels[v] for v in ids]).astype(int)
    macro, micro = f1_scores(P, Y)
    return {"macro_f1": macro, "micro_f1": micro}


@dataclass
class SweepRow:
    ratio: float
    metric: str
    mean: float
    std: float
    repeats: int
    seeds: list[int]


@dataclass
class SweepReport:
    rows: list[SweepRow]
    metadata: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        repeats = self.rows[0].repeats if self.rows else 0
        seed_cols = ",".join(f"seed{i}" for i in range(repeats))
        lines = [f"dataset,ratio,metric,mean,std,repeats,{seed_cols}"]
        name = self.metadata.get("dataset", "dataset")
        for r in self.rows:
            seeds = ",".join(str(s) for s in r.seeds)
            lines.append(f"{name},{r.ratio!r},{r.metric},{r.mean!r},"
                         f"{r.std!r},{r.repeats},{seeds}")
        return "\n".join(lines) + "\n"


def sweep(config: TrainConfig, graph: HeteroGraph, labels: LabelTable,
          ratios, repeats: int, dataset: str = "dataset") -> SweepReport:
    """Train/evaluate over every (label ratio, repeat) cell.

    Each repeat r draws a fresh split and its own training streams from
    seed = config.seed + r; rows aggregate mean and std per metric.
    """
    ratios = list(ratios)
    if not ratios or any(not 0 < r < 1 for r in ratios):
        raise ValueError("ratios must lie in (0,1)")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    started = time.time()
    rows = []
    for ratio in ratios:
        per_metric: dict[str, list[float]] = {}
        seeds = [config.seed + r for r in range(repeats)]
        for run_seed in seeds:
            split = make_split(graph, labels, ratio, seed=run_seed)
            run_cfg = replace(config, seed=run_seed)
            state, _ = train(run_cfg, graph, labels, split)
            for metric, value in evaluate(state, labels, split).items():
                per_metric.setdefault(metric, []).append(value)
        for metric, values in sorted(per_metric.items()):
            rows.append(SweepRow(ratio=ratio, metric=metric,
                                 mean=float(np.mean(values)),
                                 std=float(np.std(values)),
                                 repeats=repeats, seeds=seeds))
    sidecar = config_sidecar(config.resolved(graph, labels))
    meta = {"dataset": dataset, "wall_time_s": time.time() - started,
            "config_hash": hashlib.sha256(sidecar.encode()).hexdigest(),
            "base_seed": config.seed}
    return SweepReport(rows=rows, metadata=meta)


def config_sidecar(config: TrainConfig) -> str:
    """Plain-text key=value echo of a config (sweep sidecar file body)."""
    return "".join(f"{k}={v}\n" for k, v in sorted(config.as_dict().items()))


def export_embeddings(state: ModelState, graph: HeteroGraph, path,
                      labels: LabelTable | None = None,
                      threshold: float = 0.5) -> None:
    """Write the embedding table as TSV for downstream visualization.

    Columns: original id, type, true label(s), predicted label(s), then the
    d embedding coordinates at full double precision.  "_" marks missing
    labels/predictions; multilabel sets are comma-joined indices.
    """
    if state.emb.shape[0] != graph.num_nodes:
        raise ValueError(f"state has {state.emb.shape[0]} rows for "
                         f"{graph.num_nodes} graph nodes")
    d = state.emb.shape[1]
    header = "#id\ttype\tlabel\tpredicted\t" + "\t".join(
        f"x{j}" for j in range(d))
    lines = [header]
    all_logits = None
    if state.head is not None:
        all_logits = state.emb @ state.head.W.T + state.head.b
    for v in range(graph.num_nodes):
        true_s = "_"
        if labels is not None and v in labels.labels:
            if labels.mode == MULTICLASS:
                true_s = str(int(labels.labels[v]))
            else:
                on = np.flatnonzero(np.asarray(labels.labels[v]) > 0)
                true_s = ",".join(map(str, on)) if len(on) else "_"
        pred_s = "_"
        if (all_logits is not None and labels is not None
                and int(graph.type_of[v]) in labels.labeled_types):
            if labels.mode == MULTICLASS:
                pred_s = str(int(np.argmax(all_logits[v])))
            else:
                on = np.flatnonzero(expit(all_logits[v]) >= threshold)
                pred_s = ",".join(map(str, on)) if len(on) else "_"
        coords = "\t".join(repr(float(x)) for x in state.emb[v])
        lines.append(f"{graph.names[v]}\t{int(graph.type_of[v])}\t"
                     f"{true_s}\t{pred_s}\t{coords}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def save_model(path, state: ModelState, adam: AdamState | None,
               config: TrainConfig, labels: LabelTable | None) -> None:
    """Checkpoint the full model (+ optimizer state) for exact resume."""
    tensors = dict(state_tensors(state))
    if adam is not None:
        for name, arr in adam.m.items():
            tensors[f"adam.m.{name}"] = arr
        for name, arr in adam.v.items():
            tensors[f"adam.v.{name}"] = arr
    meta = {
        "version": CHECKPOINT_VERSION,
        "num_nodes": int(state.emb.shape[0]),
        "num_types": state.agg.num_types,
        "dim": state.agg.dim,
        "L": state.agg.L,
        "T": [state.agg.T(k) for k in range(state.agg.num_types)],
        "Q": [state.agg.Q(k) for k in range(state.agg.num_types)],
        "activation": state.agg.activation,
        "per_coord": state.agg.per_coord,
        "label_mode": labels.mode if labels is not None else None,
        "num_classes": labels.num_classes if labels is not None else None,
        "adam": None if adam is None else {
            "t": adam.t, "alpha": adam.alpha, "beta1": adam.beta1,
            "beta2": adam.beta2, "eps": adam.eps, "decay": adam.decay},
        "config": config.as_dict(),
    }
    ckpt.save_tensors(path, tensors, meta)


def load_model(path):
    """Inverse of save_model; returns (state, adam_or_None, meta)."""
    from .setfn import AggParams

    tensors, meta = ckpt.load_tensors(path)
    K = meta["num_types"]
    agg = AggParams(
        num_types=K, dim=meta["dim"],
        a=[tensors[f"agg.a{k}"] for k in range(K)],
        u=[tensors[f"agg.u{k}"] for k in range(K)],
        v=[tensors[f"agg.v{k}"] for k in range(K)],
        w=[tensors[f"agg.w{k}"] for k in range(K)],
        c=tensors["agg.c"], b=tensors["agg.b"],
        activation=meta["activation"], per_coord=meta["per_coord"])
    head = None
    if "head.W" in tensors:
        head = HeadParams(W=tensors["head.W"], b=tensors["head.b"])
    state = ModelState(emb=tensors["emb"], agg=agg, head=head)
    adam = None
    if meta.get("adam"):
        hyper = meta["adam"]
        adam = AdamState(alpha=hyper["alpha"], beta1=hyper["beta1"],
                         beta2=hyper["beta2"], eps=hyper["eps"],
                         decay=hyper.get("decay", 0.0), t=hyper["t"])
        adam.m = {k[len("adam.m."):]: v for k, v in tensors.items()
                  if k.startswith("adam.m.")}
        adam.v = {k[len("adam.v."):]: v for k, v in tensors.items()
                  if k.startswith("adam.v.")}
    return state, adam, meta
