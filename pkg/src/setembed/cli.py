"""setembed command line: train / sweep / check / export.

Exit codes: 0 success, 1 module error (bad data, divergence, I/O), 2 usage.
Flags override config-file values, which override built-in defaults.  All
randomness derives from --seed through named sub-streams, so reruns with
identical flags reproduce outputs byte for byte at --workers 1.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from . import verify
from .graphdata import load_graph, load_labels, make_split
from .training import (TrainConfig, config_sidecar, evaluate,
                       export_embeddings, load_model, save_model, split_seed,
                       sweep, train_full)

RUN_ERROR = 1


class CliError(Exception):
    """Invalid inputs discovered after argument parsing; exits with 1."""


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _ratio_list(text: str) -> list[float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected lo:hi:step")
    try:
        lo, hi, step = (float(x) for x in parts)
    except ValueError:
        raise argparse.ArgumentTypeError("expected three numbers lo:hi:step")
    if not (0.0 < lo <= hi < 1.0) or step <= 0:
        raise argparse.ArgumentTypeError(
            "need 0 < lo <= hi < 1 and step > 0")
    out, r = [], lo
    while r <= hi + 1e-9:
        out.append(round(r, 10))
        r += step
    return out


def _data_flags(sp, labels_required=False):
    sp.add_argument("--edges", required=True,
                    help="edge list file: one tab-separated id pair per line")
    sp.add_argument("--types", help="node type file: id <tab> type index")
    sp.add_argument("--labels", required=labels_required,
                    help="label file: id <tab> class index (repeatable ids "
                         "when --mode multilabel)")
    sp.add_argument("--mode", choices=("multiclass", "multilabel"),
                    default="multiclass", help="label regime")


def _train_flags(sp):
    sp.add_argument("--dim", type=_positive_int, help="embedding width "
                    "(default 64)")
    sp.add_argument("--seed", type=int, help="master seed (default 0)")
    sp.add_argument("--epochs", type=_positive_int,
                    help="training epochs (default 300)")
    sp.add_argument("--workers", type=_positive_int,
                    help="gradient-phase shard count (default 1)")
    sp.add_argument("--config", help="JSON file of training settings; "
                    "command-line flags win on conflict")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="setembed",
        description="Typed-graph node embeddings via an order-insensitive "
                    "neighborhood aggregator.")
    sub = p.add_subparsers(dest="command", required=True,
                           metavar="{train,sweep,check,export}")

    tr = sub.add_parser(
        "train", help="fit embeddings (and a classifier head when labels "
                      "are given), then write a checkpoint")
    _data_flags(tr)
    _train_flags(tr)
    tr.add_argument("--ratio", type=float, default=0.5,
                    help="labeled fraction used for the split (default 0.5)")
    tr.add_argument("--out", default="model.ckpt",
                    help="checkpoint path (default model.ckpt); per-epoch "
                         "losses go to <out>.history.csv")

    sw = sub.add_parser(
        "sweep", help="train across labeled ratios and write a CSV report")
    _data_flags(sw, labels_required=True)
    _train_flags(sw)
    sw.add_argument("--ratios", type=_ratio_list, default="0.1:0.9:0.1",
                    help="inclusive lo:hi:step (default 0.1:0.9:0.1)")
    sw.add_argument("--repeats", type=_positive_int, default=5,
                    help="independent runs per ratio (default 5)")
    sw.add_argument("--out", default="sweep.csv",
                    help="report path (default sweep.csv); the resolved "
                         "settings go to <out>.config.txt")

    ck = sub.add_parser(
        "check", help="randomized self-checks: column-order invariance, "
                      "gradients vs finite differences, permutation-average "
                      "agreement, smooth-max decay")
    ck.add_argument("--trials", type=_positive_int, default=1000,
                    help="invariance trials; other checks scale down from "
                         "this (default 1000)")
    ck.add_argument("--seed", type=int, default=0)
    ck.add_argument("--dump-dir", default="check_failures",
                    help="failing instances are saved here for replay")

    ex = sub.add_parser(
        "export", help="write the embedding table of a checkpoint as TSV")
    ex.add_argument("--checkpoint", required=True, help="trained model file")
    _data_flags(ex)
    ex.add_argument("--out", default="embeddings.tsv")
    ex.add_argument("--threshold", type=float, default=0.5,
                    help="multilabel decision threshold (default 0.5)")
    return p


def make_config(args) -> TrainConfig:
    """Merge defaults < config file < explicit flags into a TrainConfig."""
    allowed = {f.name for f in fields(TrainConfig)}
    kwargs = {}
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise CliError(f"cannot read config file: {exc}")
        except json.JSONDecodeError as exc:
            raise CliError(f"config file is not valid JSON: {exc}")
        if not isinstance(data, dict):
            raise CliError("config file must contain a JSON object")
        unknown = sorted(set(data) - allowed)
        if unknown:
            raise CliError("unknown config keys: " + ", ".join(unknown))
        kwargs.update(data)
    for name in ("dim", "seed", "epochs", "workers"):
        value = getattr(args, name, None)
        if value is not None:
            kwargs[name] = value
    try:
        return TrainConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad training settings: {exc}")


def cmd_train(args) -> int:
    config = make_config(args)
    graph = load_graph(args.edges, args.types)
    labels = split = None
    if args.labels:
        labels = load_labels(args.labels, graph, args.mode)
        split = make_split(graph, labels, args.ratio,
                           seed=split_seed(config.seed))
    state, history, adam = train_full(config, graph, labels, split)
    save_model(args.out, state, adam, config.resolved(graph, labels), labels)
    with open(str(args.out) + ".history.csv", "w", encoding="utf-8") as fh:
        fh.write("epoch,reconstruction,supervised,regularization,total\n")
        for e, lb in enumerate(history):
            fh.write(f"{e},{lb.reconstruction!r},{lb.supervised!r},"
                     f"{lb.regularization!r},{lb.total!r}\n")
    if labels is not None:
        for name, value in sorted(evaluate(state, labels, split).items()):
            print(f"{name}: {value:.4f}")
    print(f"checkpoint: {args.out}")
    return 0


def cmd_sweep(args) -> int:
    config = make_config(args)
    graph = load_graph(args.edges, args.types)
    labels = load_labels(args.labels, graph, args.mode)
    ratios = args.ratios if isinstance(args.ratios, list) \
        else _ratio_list(args.ratios)
    report = sweep(config, graph, labels, ratios, args.repeats,
                   dataset=Path(args.edges).stem)
    Path(args.out).write_text(report.to_csv(), encoding="utf-8")
    Path(str(args.out) + ".config.txt").write_text(
        config_sidecar(config.resolved(graph, labels)), encoding="utf-8")
    print(f"report: {args.out} ({len(report.rows)} rows)")
    return 0


def cmd_check(args) -> int:
    results = [
        verify.check_invariance(trials=args.trials, seed=args.seed,
                                dump_dir=args.dump_dir),
        verify.check_gradients(trials=max(1, args.trials // 5),
                               seed=args.seed, dump_dir=args.dump_dir),
        verify.check_oracle(trials=max(1, args.trials // 10),
                            seed=args.seed, dump_dir=args.dump_dir),
        verify.check_smoothmax(seed=args.seed),
    ]
    for result in results:
        print(result.line())
        for dump in result.dumps:
            print(f"    failing instance saved: {dump}")
    return 0 if all(r.passed for r in results) else RUN_ERROR


def cmd_export(args) -> int:
    graph = load_graph(args.edges, args.types)
    state, _, _ = load_model(args.checkpoint)
    labels = None
    if args.labels:
        labels = load_labels(args.labels, graph, args.mode)
    export_embeddings(state, graph, args.out, labels=labels,
                      threshold=args.threshold)
    print(f"embeddings: {args.out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {"train": cmd_train, "sweep": cmd_sweep,
               "check": cmd_check, "export": cmd_export}[args.command]
    try:
        return handler(args)
    except (CliError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUN_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
