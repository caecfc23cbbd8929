"""Cross-validation, regularization selection, and run reports.

The selection helpers share per-fold state across the C grid: stump draws,
polarities, and the sampled step-1 set do not depend on C, so each inner
fold computes them once, then sweeps C1 ascending with warm-started solves
and reuses the learned stump weights for the C2 sweep.
"""

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from ._backend import backend_name
from .data import stratified_kfold
from .errors import DataError, TrainingError
from .linsvm import SolverConfig
from .pipeline import (MbklModel, StumpBank, TRAINERS, _derive_seed,
                       _normalized_features, evaluate, prune_bank,
                       sample_step1_set, step0_init, step1_learn_theta,
                       train_output_layer)
from .stumps import evaluate_bank, generate_stumps, stump_arrays

log = logging.getLogger(__name__)

DEFAULT_C_GRID = (0.01, 0.1, 1.0, 10.0, 100.0, 1000.0)


@dataclass(frozen=True)
class RunReport:
    """Result container for a CLI run.

    kind: short run label ("train", "cv", "cvgrid", ...).
    dataset: summary facts (path, sizes, class names).
    config: the settings the run used.
    metrics: the numbers the run produced.
    times: wall-clock seconds per stage; kept out of the JSON form so two
    runs with the same seed serialize identically.
    """

    kind: str
    dataset: dict
    config: dict
    metrics: dict
    times: dict
    backend: str

    def to_json(self):
        payload = {"kind": self.kind, "dataset": self.dataset,
                   "config": self.config, "metrics": self.metrics,
                   "backend": self.backend}
        return json.dumps(payload, sort_keys=True, indent=2,
                          default=_json_default) + "\n"

    def to_text(self):
        lines = [f"kind={self.kind}", f"backend={self.backend}"]
        for section in ("dataset", "config", "metrics"):
            for key, value in sorted(getattr(self, section).items()):
                lines.append(f"{section}.{key}={_fmt(value)}")
        for key, value in sorted(self.times.items()):
            lines.append(f"time.{key}={value:.3f}s")
        return "\n".join(lines) + "\n"


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, (list, tuple)):
        return ",".join(_fmt(v) for v in value)
    return str(value)


class _FoldState:
    """Everything about one training split that no C value touches."""

    def __init__(self, train_ds, cfg):
        self.dataset = train_ds
        self.cfg = cfg
        norm, X = _normalized_features(train_ds, cfg)
        self.norm = norm
        count = cfg.stump_count(train_ds.n_features)
        self.count = count
        stumps = generate_stumps(X, count, _derive_seed(cfg.seed, 0))
        self.idx, self.thr = stump_arrays(stumps)
        self.bits = evaluate_bank(self.idx, self.thr, X)
        signs = step0_init(self.bits, train_ds.labels, train_ds.n_classes,
                           cfg.step0_mode)
        self.X1, self.y1, self.retained = sample_step1_set(
            self.bits, train_ds.labels, train_ds.n_classes, signs,
            cfg.neg_pos_ratio, cfg.step1_cap, _derive_seed(cfg.seed, 1))

    def fit_theta(self, c1, warm=None):
        """Learn stump weights at one C1, optionally warm-started.

        Returns (full-bank theta, solver state for the next C1).
        """
        sc = SolverConfig(C=c1, tol=self.cfg.tol_step1,
                          max_epochs=self.cfg.max_epochs_step1,
                          seed=self.cfg.seed)
        theta_r, _, state = step1_learn_theta(self.X1, self.y1, sc,
                                              warm_start=warm,
                                              return_state=True)
        theta = np.zeros(self.count)
        theta[self.retained] = theta_r
        return theta, state

    def fit_model(self, theta, c2):
        """Train the output layer on pruned stumps; None if nothing survives."""
        bank = StumpBank(self.idx, self.thr, theta)
        pruned, kept = prune_bank(bank)
        if pruned.n_stumps == 0:
            return None
        bits_active = self.bits.select(kept).to_bool()
        cfg2 = replace(self.cfg, c_step2=c2)
        bank_c, weights, biases, _ = train_output_layer(
            pruned, bits_active, self.dataset.labels,
            self.dataset.n_classes, cfg2)
        return MbklModel(bank_c, weights, biases, self.norm,
                         self.dataset.label_names, self.dataset.n_features)


def select_c(dataset, cfg, grid=DEFAULT_C_GRID, inner_folds=3):
    """Pick (c1, c2) by stage-wise inner cross-validation.

    Stage one sweeps C1 with the output layer held at C2=1; stage two fixes
    the winning C1 and sweeps C2. Ties go to the smaller value. Returns
    (c1, c2, detail) where detail maps each stage to its accuracy table.
    """
    grid = sorted(float(c) for c in grid)
    if not grid:
        raise DataError("the C grid is empty")
    if any(c <= 0 for c in grid):
        raise DataError("C values must be positive")
    min_count = int(dataset.class_counts().min())
    k = min(inner_folds, min_count)
    if k < 2:
        log.warning("a class has %d sample(s); skipping C selection and "
                    "using C=1", min_count)
        return 1.0, 1.0, {"fallback": True}

    folds = stratified_kfold(dataset.labels, k, _derive_seed(cfg.seed, 4))
    states = []
    tests = []
    for f, (tr, te) in enumerate(folds):
        cfg_f = replace(cfg, seed=_derive_seed(cfg.seed, 5, f))
        states.append(_FoldState(dataset.subset(tr), cfg_f))
        tests.append(dataset.subset(te))

    theta_at = [dict() for _ in folds]
    for f, state in enumerate(states):
        warm = None
        for c1 in grid:
            theta, warm = state.fit_theta(c1, warm)
            theta_at[f][c1] = theta
    best_c1, stage1 = _sweep(grid, states, tests,
                             lambda st, f, c1: st.fit_model(theta_at[f][c1],
                                                            1.0))
    best_c2, stage2 = _sweep(grid, states, tests,
                             lambda st, f, c2: st.fit_model(
                                 theta_at[f][best_c1], c2))
    detail = {"fallback": False, "inner_folds": k,
              "stage1": stage1, "stage2": stage2}
    return best_c1, best_c2, detail


def _sweep(grid, states, tests, fit):
    """Mean inner accuracy per grid value; first maximum wins."""
    table = []
    best = None
    best_acc = -np.inf
    for c in grid:
        accs = []
        for f, state in enumerate(states):
            model = fit(state, f, c)
            if model is None:
                accs.append(-np.inf)
            else:
                accs.append(evaluate(model, tests[f])["accuracy"])
        mean = float(np.mean(accs))
        table.append({"c": c, "mean_accuracy": mean})
        if mean > best_acc:
            best_acc = mean
            best = c
    if best is None or not np.isfinite(best_acc):
        raise TrainingError("every C in the grid failed to keep any stumps")
    return best, table


def _cv_fold(args):
    dataset, cfg, trainer, c_grid, f, tr, te = args
    cfg_f = replace(cfg, seed=_derive_seed(cfg.seed, 3, f))
    train_ds = dataset.subset(tr)
    picked = None
    if c_grid is not None and trainer == "mbkl":
        c1, c2, _ = select_c(train_ds, cfg_f, c_grid)
        cfg_f = replace(cfg_f, c_step1=c1, c_step2=c2)
        picked = (c1, c2)
    t0 = time.perf_counter()
    model, info = TRAINERS[trainer](train_ds, cfg_f)
    elapsed = time.perf_counter() - t0
    scores = evaluate(model, dataset.subset(te))
    return {"fold": f, "accuracy": scores["accuracy"],
            "mean_per_class": scores["mean_per_class"],
            "n_active": info.get("n_active"), "picked_c": picked,
            "train_seconds": elapsed}


def run_cv(dataset, cfg, k=10, trainer="mbkl", c_grid=None, workers=1):
    """k-fold stratified cross-validation of one trainer.

    When c_grid is given and the trainer is the staged one, each fold picks
    its own (c1, c2) by inner selection on that fold's training split.
    Returns a dict with per-fold rows and the aggregate accuracy.
    """
    if trainer not in TRAINERS:
        raise DataError(f"unknown trainer {trainer!r}")
    folds = stratified_kfold(dataset.labels, k, _derive_seed(cfg.seed, 2))
    jobs = [(dataset, cfg, trainer, c_grid, f, tr, te)
            for f, (tr, te) in enumerate(folds)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_cv_fold, jobs))
    else:
        rows = [_cv_fold(job) for job in jobs]
    accs = np.array([r["accuracy"] for r in rows])
    return {"k": k, "trainer": trainer,
            "fold_accuracies": [float(a) for a in accs],
            "mean_accuracy": float(accs.mean()),
            "std_accuracy": float(accs.std()),
            "mean_per_class": float(np.mean([r["mean_per_class"]
                                             for r in rows])),
            "folds": rows}


def _grid_fold(args):
    dataset, cfg, grid1, grid2, f, tr, te = args
    cfg_f = replace(cfg, seed=_derive_seed(cfg.seed, 3, f))
    state = _FoldState(dataset.subset(tr), cfg_f)
    test_ds = dataset.subset(te)
    out = {}
    warm = None
    for c1 in grid1:
        theta, warm = state.fit_theta(c1, warm)
        for c2 in grid2:
            model = state.fit_model(theta, c2)
            if model is None:
                out[(c1, c2)] = -np.inf
            else:
                out[(c1, c2)] = evaluate(model, test_ds)["accuracy"]
    return out


def grid_table(dataset, cfg, grid1=DEFAULT_C_GRID, grid2=DEFAULT_C_GRID,
               k=5, workers=1):
    """Cross-validated accuracy for every (c1, c2) pair.

    Returns (rows, best) where rows are sorted by (c1, c2) and best is the
    pair with the highest mean accuracy, smallest pair on ties.
    """
    grid1 = sorted(float(c) for c in grid1)
    grid2 = sorted(float(c) for c in grid2)
    if not grid1 or not grid2:
        raise DataError("the C grid is empty")
    if any(c <= 0 for c in grid1 + grid2):
        raise DataError("C values must be positive")
    folds = stratified_kfold(dataset.labels, k, _derive_seed(cfg.seed, 6))
    jobs = [(dataset, cfg, grid1, grid2, f, tr, te)
            for f, (tr, te) in enumerate(folds)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_fold = list(pool.map(_grid_fold, jobs))
    else:
        per_fold = [_grid_fold(job) for job in jobs]
    rows = []
    best = None
    best_acc = -np.inf
    for c1 in grid1:
        for c2 in grid2:
            accs = [pf[(c1, c2)] for pf in per_fold]
            mean = float(np.mean(accs))
            rows.append({"c1": c1, "c2": c2, "mean_accuracy": mean,
                         "fold_accuracies": [float(a) for a in accs]})
            if mean > best_acc:
                best_acc = mean
                best = (c1, c2)
    if best is None or not np.isfinite(best_acc):
        raise TrainingError("every grid cell failed to keep any stumps")
    return rows, best
