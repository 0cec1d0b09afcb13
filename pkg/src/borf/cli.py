"""Command-line interface.

Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import io as bio
from .explain import linear_attribution, saliency, word_prototype
from .models import arcsinh_map, fit_linear, metric_bacc, metric_mape, metric_r2, predict
from .transform import config_grid, fit, resolve_defaults, transform
from .types import TimeSeriesDataset, bag_stats

log = logging.getLogger("borf")


class UsageError(Exception):
    pass


def _grid_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="training .ts file")
    p.add_argument("--task", required=True, choices=["tsc", "tser"])
    p.add_argument("--model", required=True, help="output model file")
    p.add_argument("--window-sizes", type=int, nargs="+")
    p.add_argument("--dilations", type=int, nargs="+")
    p.add_argument("--word-lengths", type=int, nargs="+")
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--alpha-mean", type=int)
    p.add_argument("--alpha-slope", type=int)
    p.add_argument("--std-threshold", type=float)
    p.add_argument("--workers", type=int, help="worker threads (default: $BORF_NUM_WORKERS or all cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="borf", description="Bag-Of-Receptive-Fields time series transform")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="learn the vocabulary")
    _grid_args(p)
    p.add_argument("--bag", help="also write the training bag (coo-tsv)")

    p = sub.add_parser("train", help="fit, transform and train a ridge predictor")
    _grid_args(p)
    p.add_argument("--lambda", dest="lam", type=float)

    p = sub.add_parser("transform", help="count known words of a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--format", choices=list(bio.SPARSE_FORMATS), default="coo-tsv")
    p.add_argument("--workers", type=int)

    p = sub.add_parser("predict", help="predict with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--metrics", action="store_true", help="print metrics against the file's labels")
    p.add_argument("--workers", type=int)

    p = sub.add_parser("explain", help="saliency map for one series")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--index", type=int, required=True)
    p.add_argument("--importances", help="word importances (JSON or key<TAB>value lines)")
    p.add_argument("--target", help="class to explain with the built-in attribution")
    p.add_argument("--train", help="training .ts file, to attach prototypes of residual words")
    p.add_argument("--top", type=int, default=5, help="number of residual prototypes")
    p.add_argument("--output", required=True)

    p = sub.add_parser("vocab", help="list vocabulary words and training counts")
    p.add_argument("--model", required=True)
    p.add_argument("--config", type=int)

    p = sub.add_parser("stats", help="summary statistics of a bag")
    p.add_argument("--bag", required=True)
    p.add_argument("--format", choices=list(bio.SPARSE_FORMATS), default="coo-tsv")
    return parser


def _load_dataset(path: str) -> tuple[TimeSeriesDataset, bio.TsHeader]:
    return bio.parse_ts(path)


def _configs_from_args(args, dataset: TimeSeriesDataset):
    defaults = resolve_defaults(args.task)
    for key, attr in (("alpha_mean", "alpha_mean"), ("alpha_slope", "alpha_slope"), ("beta", "std_threshold")):
        if getattr(args, attr) is not None:
            defaults[key] = getattr(args, attr)
    if args.stride < 1:
        raise UsageError("--stride must be >= 1")
    configs = config_grid(
        dataset.max_length(),
        defaults,
        window_sizes=args.window_sizes,
        dilations=args.dilations,
        word_lengths=args.word_lengths,
        stride=args.stride,
    )
    return configs, defaults


def _fit(args):
    dataset, _ = _load_dataset(args.input)
    configs, defaults = _configs_from_args(args, dataset)
    log.info("fitting %d configurations on %d series", len(configs), dataset.n)
    model, bag = fit(dataset, configs, workers=args.workers, task_defaults=defaults)
    return dataset, model, bag


def cmd_fit(args) -> int:
    _, model, bag = _fit(args)
    bio.save_model(model, args.model, task=args.task)
    if args.bag:
        bio.write_sparse(bag, args.bag)
    print(f"vocabulary: {model.h} words over {len(model.configs)} configurations")
    return 0


def cmd_train(args) -> int:
    dataset, model, bag = _fit(args)
    if dataset.labels is None:
        raise UsageError(f"{args.input} has no labels to train on")
    mode = "classification" if args.task == "tsc" else "regression"
    linear = fit_linear(arcsinh_map(bag), dataset.labels, args.lam, mode)
    bio.save_model(model, args.model, linear=linear, task=args.task)
    print(f"vocabulary: {model.h} words; trained {mode} model")
    return 0


def cmd_transform(args) -> int:
    loaded = bio.load_model(args.model)
    dataset, _ = _load_dataset(args.input)
    bag = transform(loaded.borf, dataset, workers=args.workers)
    bio.write_sparse(bag, args.output, args.format, labels=dataset.labels if args.format == "svmlight" else None)
    return 0


def cmd_predict(args) -> int:
    loaded = bio.load_model(args.model)
    if loaded.linear is None:
        raise UsageError("model has no trained predictor; use `borf train`")
    dataset, _ = _load_dataset(args.input)
    feats = arcsinh_map(transform(loaded.borf, dataset, workers=args.workers))
    preds = predict(loaded.linear, feats)
    with open(args.output, "w", encoding="utf-8") as fh:
        for i, p in enumerate(preds):
            fh.write(f"{i}\t{bio._fmt_label(p)}\n")
    if args.metrics:
        if dataset.labels is None:
            raise UsageError(f"{args.input} has no labels for --metrics")
        if loaded.linear.mode == "classification":
            print(f"bACC\t{metric_bacc(dataset.labels, preds):.6f}")
        else:
            print(f"R2\t{metric_r2(dataset.labels, preds):.6f}")
            try:
                print(f"MAPE\t{metric_mape(dataset.labels, preds):.6f}")
            except ValueError as exc:
                print(f"MAPE\tundefined ({exc})")
    return 0


def cmd_explain(args) -> int:
    loaded = bio.load_model(args.model)
    dataset, _ = _load_dataset(args.input)
    if not 0 <= args.index < dataset.n:
        raise UsageError(f"--index must be in [0, {dataset.n})")
    ts = dataset.series[args.index]
    if args.importances:
        phi = bio.read_importances(args.importances, loaded.borf)
    else:
        if loaded.linear is None:
            raise UsageError("model has no predictor; pass --importances")
        row = arcsinh_map(transform(loaded.borf, TimeSeriesDataset([ts]), workers=1))
        target = args.target
        if target is not None and loaded.linear.classes is not None:
            target = next((c for c in loaded.linear.classes if str(c) == target), target)
        phi = linear_attribution(loaded.linear, row, target)
    smap, residual = saliency(loaded.borf, ts, phi)
    residual.sort(key=lambda kv: -abs(kv[1]))
    prototypes = None
    if args.train:
        train, _ = _load_dataset(args.train)
        prototypes = {k: word_prototype(loaded.borf, train, k) for k, _ in residual[: args.top]}
    bio.write_saliency(args.output, smap, residual, index=args.index, source=phi.source, prototypes=prototypes)
    if smap.degenerate:
        print("warning: zero pre-scale saliency mass; map is all zeros", file=sys.stderr)
    return 0


def cmd_vocab(args) -> int:
    loaded = bio.load_model(args.model)
    model = loaded.borf
    lo, hi = (0, model.h) if args.config is None else model.vocabulary.config_range(args.config)
    out = sys.stdout
    for col in range(lo, hi):
        out.write(f"{col}\t{model.word_key(col)}\t{int(model.vocabulary.counts[col])}\n")
    return 0


def cmd_stats(args) -> int:
    bag, _ = bio.read_sparse(args.bag, args.format)
    stats = bag_stats(bag)
    print(f"rows\t{bag.n}\ncolumns\t{bag.h}")
    print(f"nnz\t{stats['nnz']}\ndensity\t{stats['density']:.6g}\ndistinct_words\t{stats['distinct_words']}")
    return 0


COMMANDS = {
    "fit": cmd_fit,
    "train": cmd_train,
    "transform": cmd_transform,
    "predict": cmd_predict,
    "explain": cmd_explain,
    "vocab": cmd_vocab,
    "stats": cmd_stats,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with 2 on usage errors
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"borf {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError, KeyError) as exc:
        print(f"borf {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
