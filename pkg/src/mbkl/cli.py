"""Command-line entry points.

Commands: train, eval, cvgrid, bench, kernelcorr. Flag values override a
key=value config file, which overrides built-in defaults. Exit codes: 0
success, 1 usage error, 2 data error, 3 training failure.
"""

import argparse
import logging
import sys
import time
from dataclasses import replace

import numpy as np

from ._backend import backend_name
from .cv import DEFAULT_C_GRID, RunReport, grid_table, run_cv, select_c
from .data import load_csv, load_features_csv, load_sparse_text
from .errors import DataError, MbklError, TrainingError
from .kernel import distance_correlation_report
from .model_io import load_model, save_model
from .pipeline import (MbklModel, TrainConfig, evaluate, predict_batch,
                       train, train_baseline)

log = logging.getLogger(__name__)


class UsageError(MbklError):
    """Bad flags, unknown config keys, malformed argument values."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _positive_float(text):
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be a positive number")
    return value


def _on_off(text):
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return text == "on"


def _c_grid(text):
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))
    if not values:
        raise argparse.ArgumentTypeError("empty grid")
    return tuple(values)


def _seed_default():
    import os
    raw = os.environ.get("MBKL_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"MBKL_SEED must be an integer, got {raw!r}")


def _add_data_flags(sub):
    sub.add_argument("--data", required=True, help="dataset path")
    sub.add_argument("--format", choices=("csv", "sparse"), help="file format")
    sub.add_argument("--label-column", type=int,
                     help="label column for csv data (default last)")
    sub.add_argument("--csv-header", action="store_true", default=None,
                     help="skip the first csv line")


def _add_train_flags(sub):
    sub.add_argument("--stumps", type=int, help="bank size (default 10*d, "
                     "at least 10000)")
    sub.add_argument("--neg-pos-ratio", type=_positive_float,
                     help="negatives per positive in the weight-learning set")
    sub.add_argument("--step1-cap", type=_positive_int,
                     help="row cap for the weight-learning set")
    sub.add_argument("--c1", type=_positive_float,
                     help="C for the weight-learning solve")
    sub.add_argument("--c2", type=_positive_float,
                     help="C for the output-layer solve")
    sub.add_argument("--normalize", type=_on_off,
                     help="logistic feature squashing: on or off")
    sub.add_argument("--step0-table", choices=("majority", "verbatim"),
                     help="polarity table variant")


def build_parser():
    parser = _Parser(prog="mbkl", description=__doc__.splitlines()[0])
    commands = parser.add_subparsers(dest="command", required=True)

    tr = commands.add_parser("train", help="train a model, optionally with "
                             "cross-validation")
    _add_data_flags(tr)
    _add_train_flags(tr)
    tr.add_argument("--folds", type=_positive_int,
                    help="also report stratified k-fold accuracy")
    tr.add_argument("--seed", type=int, help="master seed (MBKL_SEED, then 0)")
    tr.add_argument("--baseline", choices=("none", "theta1", "l1bits",
                                           "linear"),
                    help="train this baseline instead of the staged model")
    tr.add_argument("--workers", type=_positive_int,
                    help="parallel fold workers")
    tr.add_argument("--out", help="model file to write")
    tr.add_argument("--report", help="JSON report path")
    tr.add_argument("--config", help="key=value defaults file")

    ev = commands.add_parser("eval", help="evaluate a model file on a "
                             "labeled dataset")
    _add_data_flags(ev)
    ev.add_argument("--model", required=True, help="model file")
    ev.add_argument("--predictions", help="per-sample prediction csv path")
    ev.add_argument("--report", help="JSON report path")
    ev.add_argument("--config", help="key=value defaults file")

    cg = commands.add_parser("cvgrid", help="cross-validated accuracy over "
                             "the C grid")
    _add_data_flags(cg)
    _add_train_flags(cg)
    cg.add_argument("--grid", type=_c_grid,
                    help="comma-separated C values for both stages")
    cg.add_argument("--folds", type=_positive_int, help="fold count")
    cg.add_argument("--seed", type=int, help="master seed")
    cg.add_argument("--workers", type=_positive_int,
                    help="parallel fold workers")
    cg.add_argument("--report", help="JSON report path")
    cg.add_argument("--config", help="key=value defaults file")

    be = commands.add_parser("bench", help="median per-sample prediction "
                             "latency")
    _add_data_flags(be)
    be.add_argument("--model", required=True, help="model file")
    be.add_argument("--repeats", type=_positive_int,
                    help="timing repetitions")
    be.add_argument("--report", help="JSON report path")
    be.add_argument("--config", help="key=value defaults file")

    kc = commands.add_parser("kernelcorr", help="histogram-distance vs "
                             "kernel-distance correlation")
    _add_data_flags(kc)
    kc.add_argument("--no-labels", action="store_true", default=None,
                    help="csv rows are features only")
    kc.add_argument("--stumps", type=_positive_int, help="bank size")
    kc.add_argument("--seed", type=int, help="master seed")
    kc.add_argument("--scatter", help="scatter csv path")
    kc.add_argument("--report", help="JSON report path")
    kc.add_argument("--config", help="key=value defaults file")
    return parser


_DEFAULTS = {
    "format": "csv",
    "label_column": -1,
    "csv_header": False,
    "stumps": None,
    "neg_pos_ratio": 2.0,
    "step1_cap": 50000,
    "c1": None,
    "c2": None,
    "normalize": True,
    "step0_table": "majority",
    "folds": None,
    "baseline": "none",
    "workers": 1,
    "grid": DEFAULT_C_GRID,
    "repeats": 5,
    "no_labels": False,
    "out": None,
    "report": None,
    "predictions": None,
    "scatter": None,
}

_CONFIG_TYPES = {
    "format": str,
    "label_column": int,
    "csv_header": lambda v: v.lower() in ("1", "true", "yes", "on"),
    "stumps": int,
    "neg_pos_ratio": float,
    "step1_cap": int,
    "c1": float,
    "c2": float,
    "normalize": lambda v: _on_off(v),
    "step0_table": str,
    "folds": int,
    "seed": int,
    "baseline": str,
    "workers": int,
    "grid": lambda v: _c_grid(v),
    "repeats": int,
    "no_labels": lambda v: v.lower() in ("1", "true", "yes", "on"),
    "out": str,
    "report": str,
    "predictions": str,
    "scatter": str,
}


def _read_config(path):
    pairs = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                text = line.split("#", 1)[0].strip()
                if not text:
                    continue
                if "=" not in text:
                    raise UsageError(f"{path}:{lineno}: expected key=value")
                key, value = text.split("=", 1)
                key = key.strip().replace("-", "_")
                if key not in _CONFIG_TYPES:
                    raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
                try:
                    pairs[key] = _CONFIG_TYPES[key](value.strip())
                except (ValueError, argparse.ArgumentTypeError) as exc:
                    raise UsageError(f"{path}:{lineno}: {exc}")
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}")
    return pairs


def _effective(args):
    """Merge defaults, config file entries, and explicit flags."""
    merged = dict(_DEFAULTS)
    merged["seed"] = _seed_default()
    config_path = getattr(args, "config", None)
    if config_path:
        merged.update(_read_config(config_path))
    for key, value in vars(args).items():
        if key in ("command", "config"):
            continue
        if value is not None:
            merged[key] = value
    return merged


def _load_dataset(opt):
    if opt["format"] == "sparse":
        return load_sparse_text(opt["data"])
    return load_csv(opt["data"], label_column=opt["label_column"],
                    has_header=opt["csv_header"])


def _train_config(opt):
    return TrainConfig(n_stumps=opt["stumps"],
                       neg_pos_ratio=opt["neg_pos_ratio"],
                       step1_cap=opt["step1_cap"],
                       c_step1=opt["c1"] if opt["c1"] is not None else 1.0,
                       c_step2=opt["c2"] if opt["c2"] is not None else 1.0,
                       seed=opt["seed"],
                       step0_mode=opt["step0_table"],
                       normalize=opt["normalize"])


def _dataset_summary(opt, ds):
    return {"path": opt["data"], "n_samples": ds.n_samples,
            "n_features": ds.n_features, "n_classes": ds.n_classes,
            "labels": list(ds.label_names)}


def _config_echo(opt, keys):
    echo = {}
    for key in keys:
        value = opt[key]
        echo[key] = list(value) if isinstance(value, tuple) else value
    return echo


def _emit(report, opt):
    sys.stdout.write(report.to_text())
    if opt["report"]:
        with open(opt["report"], "w", encoding="utf-8") as fh:
            fh.write(report.to_json())


def cmd_train(args):
    opt = _effective(args)
    ds = _load_dataset(opt)
    cfg = _train_config(opt)
    trainer = "mbkl" if opt["baseline"] == "none" else opt["baseline"]
    selecting = (trainer == "mbkl" and opt["c1"] is None
                 and opt["c2"] is None)
    times = {}
    metrics = {}
    picked = None
    if opt["folds"]:
        # with selection active each fold picks its own C pair on its
        # training split, so fold accuracies stay honest
        t0 = time.perf_counter()
        cv = run_cv(ds, cfg, k=opt["folds"], trainer=trainer,
                    c_grid=opt["grid"] if selecting else None,
                    workers=opt["workers"])
        times["cv"] = time.perf_counter() - t0
        metrics["fold_accuracies"] = cv["fold_accuracies"]
        metrics["mean_accuracy"] = cv["mean_accuracy"]
        metrics["std_accuracy"] = cv["std_accuracy"]
        metrics["mean_per_class"] = cv["mean_per_class"]
        if selecting:
            metrics["fold_picked_c"] = [row["picked_c"]
                                        for row in cv["folds"]]
    if selecting:
        t0 = time.perf_counter()
        c1, c2, _ = select_c(ds, cfg, opt["grid"])
        times["select_c"] = time.perf_counter() - t0
        cfg = replace(cfg, c_step1=c1, c_step2=c2)
        picked = (c1, c2)
        metrics["selected_c1"] = c1
        metrics["selected_c2"] = c2
    t0 = time.perf_counter()
    model, info = train_baseline(ds, cfg, trainer) if trainer != "mbkl" \
        else train(ds, cfg)
    times.update({f"train_{k}": v for k, v in info.get("times", {}).items()})
    times["train_total"] = time.perf_counter() - t0
    metrics["train_accuracy"] = evaluate(model, ds)["accuracy"]
    if "n_active" in info:
        metrics["n_active"] = info["n_active"]
    if opt["out"]:
        save_model(model, opt["out"])
    echo = _config_echo(opt, ("stumps", "neg_pos_ratio", "step1_cap",
                              "normalize", "step0_table", "baseline",
                              "folds", "seed"))
    echo["c1"], echo["c2"] = cfg.c_step1, cfg.c_step2
    if picked:
        echo["c_selected"] = True
    report = RunReport("train", _dataset_summary(opt, ds), echo, metrics,
                       times, backend_name())
    _emit(report, opt)
    return 0


def cmd_eval(args):
    opt = _effective(args)
    ds = _load_dataset(opt)
    model = load_model(opt["model"])
    if model.n_features != ds.n_features:
        raise DataError(f"model expects {model.n_features} features, data "
                        f"has {ds.n_features}")
    if model.n_classes != ds.n_classes:
        raise DataError(f"model has {model.n_classes} classes, data has "
                        f"{ds.n_classes}")
    t0 = time.perf_counter()
    classes, scores = predict_batch(model, ds.features)
    elapsed = time.perf_counter() - t0
    correct = classes == ds.labels
    per_class = []
    for c in range(ds.n_classes):
        mask = ds.labels == c
        per_class.append(float(correct[mask].mean()) if mask.any()
                         else float("nan"))
    present = [v for v in per_class if v == v]
    metrics = {"accuracy": float(correct.mean()),
               "mean_per_class": float(np.mean(present)),
               "n_samples": ds.n_samples}
    if opt["predictions"]:
        with open(opt["predictions"], "w", encoding="utf-8") as fh:
            fh.write("row,true_label,predicted_label,score\n")
            for r in range(ds.n_samples):
                fh.write(f"{r},{ds.label_names[ds.labels[r]]},"
                         f"{ds.label_names[classes[r]]},"
                         f"{float(scores[r, classes[r]])!r}\n")
    report = RunReport("eval", _dataset_summary(opt, ds),
                       {"model": opt["model"]}, metrics,
                       {"predict": elapsed}, backend_name())
    _emit(report, opt)
    return 0


def cmd_cvgrid(args):
    opt = _effective(args)
    ds = _load_dataset(opt)
    cfg = _train_config(opt)
    folds = opt["folds"] or 5
    t0 = time.perf_counter()
    rows, best = grid_table(ds, cfg, opt["grid"], opt["grid"], k=folds,
                            workers=opt["workers"])
    elapsed = time.perf_counter() - t0
    metrics = {"best_c1": best[0], "best_c2": best[1],
               "table": [{"c1": r["c1"], "c2": r["c2"],
                          "mean_accuracy": r["mean_accuracy"]}
                         for r in rows]}
    echo = _config_echo(opt, ("stumps", "grid", "seed", "normalize",
                              "step0_table"))
    echo["folds"] = folds
    report = RunReport("cvgrid", _dataset_summary(opt, ds), echo, metrics,
                       {"grid": elapsed}, backend_name())
    _emit(report, opt)
    return 0


def cmd_bench(args):
    opt = _effective(args)
    ds = _load_dataset(opt)
    model = load_model(opt["model"])
    if model.n_features != ds.n_features:
        raise DataError(f"model expects {model.n_features} features, data "
                        f"has {ds.n_features}")
    X = ds.features
    predict_batch(model, X)  # warm up caches and lazy buffers
    laps = []
    for _ in range(opt["repeats"]):
        t0 = time.perf_counter()
        predict_batch(model, X)
        laps.append((time.perf_counter() - t0) / X.shape[0])
    per_sample = float(np.median(laps))
    active = model.bank.n_stumps if isinstance(model, MbklModel) else 0
    metrics = {"per_sample_us": per_sample * 1e6,
               "n_active": active, "n_features": ds.n_features,
               "n_samples": ds.n_samples, "repeats": opt["repeats"]}
    report = RunReport("bench", _dataset_summary(opt, ds),
                       {"model": opt["model"], "repeats": opt["repeats"]},
                       metrics, {"total": float(np.sum(laps) * X.shape[0])},
                       backend_name())
    _emit(report, opt)
    return 0


def cmd_kernelcorr(args):
    opt = _effective(args)
    if opt["no_labels"]:
        if opt["format"] == "sparse":
            raise UsageError("--no-labels requires csv data")
        X = load_features_csv(opt["data"], has_header=opt["csv_header"])
        summary = {"path": opt["data"], "n_samples": X.shape[0],
                   "n_features": X.shape[1]}
    else:
        ds = _load_dataset(opt)
        X = ds.features
        summary = _dataset_summary(opt, ds)
    stumps = opt["stumps"] or 30000
    t0 = time.perf_counter()
    rep = distance_correlation_report(X, stumps, opt["seed"])
    elapsed = time.perf_counter() - t0
    if rep.degenerate:
        log.warning("distance columns have zero variance; correlation is "
                    "undefined")
    if opt["scatter"]:
        with open(opt["scatter"], "w", encoding="utf-8") as fh:
            fh.write("chi2,kernel_distance\n")
            for a, b in zip(rep.chi2, rep.kernel_distance):
                fh.write(f"{float(a)!r},{float(b)!r}\n")
    metrics = {"pearson_r": rep.pearson_r, "n_pairs": rep.n_pairs,
               "degenerate": rep.degenerate}
    report = RunReport("kernelcorr", summary,
                       {"stumps": stumps, "seed": opt["seed"]}, metrics,
                       {"total": elapsed}, backend_name())
    _emit(report, opt)
    return 0


_COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "cvgrid": cmd_cvgrid,
    "bench": cmd_bench,
    "kernelcorr": cmd_kernelcorr,
}


def main(argv=None):
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except TrainingError as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
