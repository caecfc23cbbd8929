"""Training pipeline: polarity initialization, sparse weight learning over
stump agreements, and a per-class output layer on the weighted binary map.

Stage overview for the main model:

0. Each stump gets a per-class polarity from class-conditional firing
   proportions (a verbatim table mode and its sign-swapped majority mode).
1. One two-class L1 solve over signed stump responses learns a shared
   nonnegative weight per stump; negatives are drawn from wrong classes.
   Weights clamped at zero induce the pruned bank.
2. Retained weights are scaled to mean one and expanded into the explicit
   weighted pair map [theta*b, theta*(1-b), ...]; a squared-norm hinge
   classifier per class (one-vs-rest) produces the output layer.

The same stump draws are reused by every stage; nothing is re-sampled.
"""

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from ._backend import backend_name, core
from .data import Dataset, apply_normalization, fit_logistic_normalizer
from .errors import DataError, TrainingError
from .linsvm import SolverConfig, train_l1, train_l2
from .stumps import (BitMatrix, Stump, evaluate_bank, generate_stumps,
                     pack_sample_mask, stump_arrays)

log = logging.getLogger(__name__)

_STEP0_MODES = ("majority", "verbatim")


@dataclass(frozen=True)
class TrainConfig:
    """Knobs for the full training run.

    n_stumps None means max(10 * n_features, 10000). The seed drives stump
    draws and negative sampling; solvers are deterministic.
    """

    n_stumps: int = None
    neg_pos_ratio: float = 2.0
    step1_cap: int = 50000
    c_step1: float = 1.0
    c_step2: float = 1.0
    seed: int = 0
    step0_mode: str = "majority"
    normalize: bool = True
    tol_step1: float = 3e-3
    tol_step2: float = 1e-4
    max_epochs_step1: int = 40000
    max_epochs_step2: int = 30000

    def __post_init__(self):
        if self.n_stumps is not None and self.n_stumps < 1:
            raise DataError("n_stumps must be positive")
        if not self.neg_pos_ratio > 0:
            raise DataError("neg_pos_ratio must be positive")
        if self.step1_cap < 1:
            raise DataError("step1_cap must be positive")
        if self.step0_mode not in _STEP0_MODES:
            raise DataError(f"step0_mode must be one of {_STEP0_MODES}")
        for name in ("c_step1", "c_step2"):
            if not getattr(self, name) > 0:
                raise DataError(f"{name} must be positive")

    def stump_count(self, n_features):
        if self.n_stumps is not None:
            return self.n_stumps
        return max(10 * n_features, 10000)


@dataclass(frozen=True)
class StumpBank:
    """Stumps with their combination weights."""

    feature_indices: np.ndarray
    thresholds: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        fi = np.ascontiguousarray(np.asarray(self.feature_indices, np.uint32))
        th = np.ascontiguousarray(np.asarray(self.thresholds, np.float64))
        tt = np.ascontiguousarray(np.asarray(self.theta, np.float64))
        if not (fi.ndim == th.ndim == tt.ndim == 1):
            raise DataError("bank arrays must be 1-D")
        if not (fi.shape == th.shape == tt.shape):
            raise DataError("bank arrays must have matching lengths")
        if not np.isfinite(th).all() or not np.isfinite(tt).all():
            raise DataError("bank thresholds and weights must be finite")
        if (tt < 0).any():
            raise DataError("bank weights must be nonnegative")
        object.__setattr__(self, "feature_indices", fi)
        object.__setattr__(self, "thresholds", th)
        object.__setattr__(self, "theta", tt)

    @property
    def n_stumps(self):
        return self.feature_indices.shape[0]

    def to_stumps(self):
        return [Stump(int(i), float(t))
                for i, t in zip(self.feature_indices, self.thresholds)]


@dataclass(frozen=True)
class Step0Signs:
    """Per-class stump polarities in {-1, 0, +1}, one row per class."""

    signs: np.ndarray

    def __post_init__(self):
        s = np.ascontiguousarray(np.asarray(self.signs, np.int8))
        if s.ndim != 2:
            raise DataError("signs must be (n_classes, n_stumps)")
        if not np.isin(s, (-1, 0, 1)).all():
            raise DataError("signs must be -1, 0, or +1")
        object.__setattr__(self, "signs", s)

    @property
    def retained_mask(self):
        """Stumps with a nonzero polarity for at least one class."""
        return (self.signs != 0).any(axis=0)


@dataclass(eq=False)
class MbklModel:
    """Trained model: stump bank, per-class output layer, normalization."""

    bank: StumpBank
    class_weights: np.ndarray
    class_biases: np.ndarray
    normalization: object
    label_names: tuple
    n_features: int
    _cache: tuple = field(default=None, init=False, repr=False)

    def __post_init__(self):
        w = np.ascontiguousarray(np.asarray(self.class_weights, np.float64))
        b = np.ascontiguousarray(np.asarray(self.class_biases, np.float64))
        if w.ndim != 2 or w.shape[1] != 2 * self.bank.n_stumps:
            raise DataError("class_weights must be (n_classes, 2*n_stumps)")
        if b.shape != (w.shape[0],):
            raise DataError("class_biases must match the class count")
        if w.shape[0] != len(self.label_names):
            raise DataError("label_names must match the class count")
        self.class_weights = w
        self.class_biases = b
        self.label_names = tuple(str(s) for s in self.label_names)

    @property
    def n_classes(self):
        return self.class_weights.shape[0]

    def scorer(self):
        """Folded score form: score_c(x) = base_c + sum_{fired k} delta_ck."""
        if self._cache is None:
            theta = self.bank.theta
            fired = self.class_weights[:, 0::2]
            unfired = self.class_weights[:, 1::2]
            delta = np.ascontiguousarray(theta * (fired - unfired))
            # sum the constant part over active stumps only so the value is
            # independent of how many zero-weight stumps the bank carries
            active = np.nonzero(theta)[0]
            base = np.ascontiguousarray(
                self.class_biases
                + (theta[active] * unfired[:, active]).sum(axis=1))
            self._cache = (delta, base)
        return self._cache


@dataclass(eq=False)
class LinearBaselineModel:
    """One-vs-rest linear classifier on (optionally normalized) features."""

    weights: np.ndarray
    biases: np.ndarray
    normalization: object
    label_names: tuple
    n_features: int

    def __post_init__(self):
        w = np.ascontiguousarray(np.asarray(self.weights, np.float64))
        b = np.ascontiguousarray(np.asarray(self.biases, np.float64))
        if w.ndim != 2 or w.shape[1] != self.n_features:
            raise DataError("weights must be (n_classes, n_features)")
        if b.shape != (w.shape[0],):
            raise DataError("biases must match the class count")
        self.weights = w
        self.biases = b
        self.label_names = tuple(str(s) for s in self.label_names)

    @property
    def n_classes(self):
        return self.weights.shape[0]


def step0_sign(fired_pos, total_pos, fired_neg, total_neg, mode="majority"):
    """Polarity for one stump from its class-conditional firing counts.

    The half boundary is exact: a proportion counts as majority when
    2 * fired >= total. Verbatim mode maps (minority, majority) -> +1 and
    (majority, minority) -> -1; majority mode swaps the two signs. Both
    agreement cells map to 0.
    """
    if not (0 <= fired_pos <= total_pos and 0 <= fired_neg <= total_neg):
        raise DataError("firing counts must lie within their totals")
    if total_pos < 1 or total_neg < 1:
        raise DataError("each side needs at least one sample")
    if mode not in _STEP0_MODES:
        raise DataError(f"mode must be one of {_STEP0_MODES}")
    pos_major = 2 * fired_pos >= total_pos
    neg_major = 2 * fired_neg >= total_neg
    if pos_major == neg_major:
        return 0
    verbatim = 1 if neg_major else -1
    return -verbatim if mode == "majority" else verbatim


def step0_init(bits, labels, n_classes, mode="majority"):
    """Vectorized polarities for every (class, stump) pair."""
    labels = np.asarray(labels, np.int64)
    if mode not in _STEP0_MODES:
        raise DataError(f"mode must be one of {_STEP0_MODES}")
    n = bits.n_samples
    if labels.shape != (n,):
        raise DataError("labels must match the bit matrix sample count")
    totals = np.bincount(labels, minlength=n_classes)
    if (totals == 0).any() or n_classes < 2:
        raise DataError("every class needs at least one sample")
    masks = np.stack([pack_sample_mask(labels == c) for c in range(n_classes)])
    counts = np.empty((n_classes, bits.n_stumps), np.int64)
    core.popcount_rows_and(bits.words, masks, counts)
    fired_total = counts.sum(axis=0)
    signs = np.zeros((n_classes, bits.n_stumps), np.int8)
    for c in range(n_classes):
        pos_major = 2 * counts[c] >= totals[c]
        neg_major = 2 * (fired_total - counts[c]) >= (n - totals[c])
        verbatim = np.where(pos_major, -1, 1).astype(np.int8)
        sign = -verbatim if mode == "majority" else verbatim
        sign[pos_major == neg_major] = 0
        signs[c] = sign
    return Step0Signs(signs)


def sample_step1_set(bits, labels, n_classes, signs, ratio, cap, seed):
    """Build the signed-response training set for the shared-weight solve.

    Positives: every sample under its own class's polarities, in sample
    order. Negatives: for each target class, about ratio * class-size rows
    drawn without replacement from wrong classes (split evenly, remainders
    to the lower class ids), under the target class's polarities. The total
    is capped at cap; positives are always kept.
    """
    labels = np.asarray(labels, np.int64)
    retained = np.nonzero(signs.retained_mask)[0]
    if retained.size == 0:
        raise TrainingError("no stumps received a nonzero polarity")
    n = labels.shape[0]
    sub = bits.select(retained)
    B = 2.0 * sub.to_bool().T - 1.0  # (n, m) in {-1, +1}
    sgn = signs.signs[:, retained].astype(np.float64)  # (C, m)

    pos_rows = B * sgn[labels]
    max_neg = cap - n
    if max_neg <= 0:
        raise TrainingError(f"step1_cap {cap} leaves no room for negatives "
                            f"with {n} positives")

    members = [np.nonzero(labels == c)[0] for c in range(n_classes)]
    cells = []
    want_total = 0
    short = 0
    for cy in range(n_classes):
        quota = int(round(ratio * members[cy].size))
        wrong = [c for c in range(n_classes) if c != cy]
        base, rem = divmod(quota, len(wrong))
        for i, cw in enumerate(wrong):
            want = base + (1 if i < rem else 0)
            have = members[cw].size
            if want > have:
                short += want - have
                want = have
            cells.append([cy, cw, want])
            want_total += want
    if short:
        # with two classes any ratio >= 1 saturates, so that case is routine
        level = logging.INFO if n_classes == 2 else logging.WARNING
        log.log(level, "negative sampling short by %d rows: wrong classes "
                "are smaller than their quota; taking all", short)
    if want_total > max_neg:
        log.warning("negative sampling capped: %d wanted, %d allowed",
                    want_total, max_neg)
        scale = max_neg / want_total
        original = [c[2] for c in cells]
        for cell, orig in zip(cells, original):
            cell[2] = int(orig * scale)
        leftover = max_neg - sum(c[2] for c in cells)
        i = 0
        while leftover > 0:
            if cells[i % len(cells)][2] < original[i % len(cells)]:
                cells[i % len(cells)][2] += 1
                leftover -= 1
            i += 1
    rng = np.random.default_rng(seed)
    neg_blocks = []
    for cy, cw, count in cells:
        if count == 0:
            continue
        chosen = rng.choice(members[cw], size=count, replace=False)
        chosen.sort()
        neg_blocks.append(B[chosen] * sgn[cy])
    if neg_blocks:
        X1 = np.concatenate([pos_rows] + neg_blocks, axis=0)
    else:
        X1 = pos_rows
    y1 = np.full(X1.shape[0], -1.0)
    y1[:n] = 1.0
    if X1.shape[0] == n:
        raise TrainingError("negative sampling produced no rows")
    return np.ascontiguousarray(X1), y1, retained


def step1_learn_theta(responses, y, cfg, warm_start=None, return_state=False):
    """Learn shared stump weights by an L1 hinge solve, clamped at zero."""
    out = train_l1(responses, y, cfg, warm_start=warm_start,
                   return_state=return_state)
    model, state = out if return_state else (out, None)
    theta = np.maximum(model.weights, 0.0)
    if return_state:
        return theta, model, state
    return theta, model


def prune_bank(bank):
    """Drop zero-weight stumps, preserving order.

    Returns the pruned bank and the kept indices into the original bank.
    """
    kept = np.nonzero(bank.theta > 0.0)[0]
    pruned = StumpBank(bank.feature_indices[kept], bank.thresholds[kept],
                       bank.theta[kept])
    return pruned, kept


def canonicalize_theta(bank):
    """Scale weights to mean one so the output layer sees a fixed scale.

    This makes the predicted classes invariant to any positive rescaling of
    the weights that happens before the output layer is trained.
    """
    if bank.n_stumps == 0:
        return bank
    total = float(bank.theta.sum())
    if total <= 0:
        raise TrainingError("cannot canonicalize an all-zero bank")
    return StumpBank(bank.feature_indices, bank.thresholds,
                     bank.theta * (bank.n_stumps / total))


def step2_feature_map(bits_bool, theta):
    """Explicit weighted pair map: columns 2k, 2k+1 are theta_k * b_k and
    theta_k * (1 - b_k) for each retained stump k."""
    B = np.asarray(bits_bool, np.float64).T  # (n, K')
    theta = np.asarray(theta, np.float64)
    if B.shape[1] != theta.shape[0]:
        raise DataError("bit rows must match the weight count")
    phi = np.empty((B.shape[0], 2 * theta.shape[0]))
    phi[:, 0::2] = B * theta
    phi[:, 1::2] = (1.0 - B) * theta
    return phi


def train_output_layer(bank, bits_bool, labels, n_classes, cfg):
    """Canonicalize weights, build the pair map, and fit one-vs-rest
    squared-norm hinge classifiers. Returns (bank, weights, biases, info)."""
    bank = canonicalize_theta(bank)
    phi = step2_feature_map(bits_bool, bank.theta)
    sc = SolverConfig(C=cfg.c_step2, tol=cfg.tol_step2,
                      max_epochs=cfg.max_epochs_step2, seed=cfg.seed)
    weights = np.empty((n_classes, phi.shape[1]))
    biases = np.empty(n_classes)
    labels = np.asarray(labels, np.int64)
    converged = True
    for c in range(n_classes):
        yc = np.where(labels == c, 1.0, -1.0)
        lm = train_l2(phi, yc, sc)
        weights[c] = lm.weights
        biases[c] = lm.bias
        converged = converged and lm.converged
    return bank, weights, biases, {"converged": converged}


def _check_trainable(dataset):
    if dataset.n_classes < 2:
        raise DataError("training needs at least two classes")
    if (dataset.class_counts() == 0).any():
        raise DataError("every class must appear in the training data")


def _normalized_features(dataset, cfg):
    if cfg.normalize:
        norm = fit_logistic_normalizer(dataset)
        return norm, apply_normalization(norm, dataset.features)
    return None, dataset.features


def _derive_seed(seed, *key):
    ss = np.random.SeedSequence(entropy=seed, spawn_key=key)
    return int(ss.generate_state(1)[0])


def train(dataset, cfg):
    """Full three-stage training. Returns (model, info).

    info carries per-stage wall times and stage diagnostics; it is not part
    of the model.
    """
    _check_trainable(dataset)
    times = {}
    t0 = time.perf_counter()
    norm, X = _normalized_features(dataset, cfg)
    times["normalize"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    count = cfg.stump_count(dataset.n_features)
    stumps = generate_stumps(X, count, _derive_seed(cfg.seed, 0))
    idx, thr = stump_arrays(stumps)
    bits = evaluate_bank(idx, thr, X)
    times["stumps"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    signs = step0_init(bits, dataset.labels, dataset.n_classes, cfg.step0_mode)
    times["step0"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    X1, y1, retained = sample_step1_set(bits, dataset.labels,
                                        dataset.n_classes, signs,
                                        cfg.neg_pos_ratio, cfg.step1_cap,
                                        _derive_seed(cfg.seed, 1))
    sc1 = SolverConfig(C=cfg.c_step1, tol=cfg.tol_step1,
                       max_epochs=cfg.max_epochs_step1, seed=cfg.seed)
    theta_r, lm1 = step1_learn_theta(X1, y1, sc1)
    theta = np.zeros(count)
    theta[retained] = theta_r
    times["step1"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    bank = StumpBank(idx, thr, theta)
    pruned, kept = prune_bank(bank)
    if pruned.n_stumps == 0:
        raise TrainingError("no stumps kept a positive weight; try a larger "
                            "C or more stumps")
    bits_active = bits.select(kept).to_bool()
    bank_c, weights, biases, info2 = train_output_layer(
        pruned, bits_active, dataset.labels, dataset.n_classes, cfg)
    times["step2"] = time.perf_counter() - t0

    model = MbklModel(bank_c, weights, biases, norm, dataset.label_names,
                      dataset.n_features)
    info = {
        "times": times,
        "backend": backend_name(),
        "n_stumps": count,
        "n_retained": int(retained.size),
        "n_active": int(pruned.n_stumps),
        "step1": {"iterations": lm1.iterations, "gap": lm1.gap,
                  "converged": lm1.converged,
                  "samples": int(X1.shape[0])},
        "step2": info2,
    }
    return model, info


def train_theta1_baseline(dataset, cfg):
    """Skip stages 0-1: all stumps kept with unit weight."""
    _check_trainable(dataset)
    times = {}
    t0 = time.perf_counter()
    norm, X = _normalized_features(dataset, cfg)
    count = cfg.stump_count(dataset.n_features)
    stumps = generate_stumps(X, count, _derive_seed(cfg.seed, 0))
    idx, thr = stump_arrays(stumps)
    bits = evaluate_bank(idx, thr, X)
    times["stumps"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    bank = StumpBank(idx, thr, np.ones(count))
    bank_c, weights, biases, info2 = train_output_layer(
        bank, bits.to_bool(), dataset.labels, dataset.n_classes, cfg)
    times["step2"] = time.perf_counter() - t0
    model = MbklModel(bank_c, weights, biases, norm, dataset.label_names,
                      dataset.n_features)
    return model, {"times": times, "n_stumps": count, "n_active": count,
                   "step2": info2}


def train_l1_bits_baseline(dataset, cfg):
    """Per-class L1 classifiers on raw stump bits, kept in pair-map form.

    A weight v on a stump becomes the pair (v, -v) with unit stump weight,
    which reproduces v * (2b - 1) exactly.
    """
    _check_trainable(dataset)
    times = {}
    t0 = time.perf_counter()
    norm, X = _normalized_features(dataset, cfg)
    count = cfg.stump_count(dataset.n_features)
    stumps = generate_stumps(X, count, _derive_seed(cfg.seed, 0))
    idx, thr = stump_arrays(stumps)
    bits = evaluate_bank(idx, thr, X)
    times["stumps"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    F = np.ascontiguousarray(2.0 * bits.to_bool().T - 1.0)
    sc1 = SolverConfig(C=cfg.c_step1, tol=cfg.tol_step1,
                       max_epochs=cfg.max_epochs_step1, seed=cfg.seed)
    weights = np.empty((dataset.n_classes, 2 * count))
    biases = np.empty(dataset.n_classes)
    nnz = []
    for c in range(dataset.n_classes):
        yc = np.where(dataset.labels == c, 1.0, -1.0)
        lm = train_l1(F, yc, sc1)
        weights[c, 0::2] = lm.weights
        weights[c, 1::2] = -lm.weights
        biases[c] = lm.bias
        nnz.append(int(np.count_nonzero(lm.weights)))
    times["step1"] = time.perf_counter() - t0
    bank = StumpBank(idx, thr, np.ones(count))
    model = MbklModel(bank, weights, biases, norm, dataset.label_names,
                      dataset.n_features)
    return model, {"times": times, "n_stumps": count, "n_active": count,
                   "nonzero_per_class": nnz}


def train_linear_baseline(dataset, cfg):
    """One-vs-rest squared-norm hinge classifiers on the plain features."""
    _check_trainable(dataset)
    times = {}
    t0 = time.perf_counter()
    norm, X = _normalized_features(dataset, cfg)
    sc = SolverConfig(C=cfg.c_step2, tol=cfg.tol_step2,
                      max_epochs=cfg.max_epochs_step2, seed=cfg.seed)
    weights = np.empty((dataset.n_classes, dataset.n_features))
    biases = np.empty(dataset.n_classes)
    X = np.ascontiguousarray(X)
    for c in range(dataset.n_classes):
        yc = np.where(dataset.labels == c, 1.0, -1.0)
        lm = train_l2(X, yc, sc)
        weights[c] = lm.weights
        biases[c] = lm.bias
    times["train"] = time.perf_counter() - t0
    model = LinearBaselineModel(weights, biases, norm, dataset.label_names,
                                dataset.n_features)
    return model, {"times": times}


def _prepare_features(model, X):
    X = np.asarray(X, np.float64)
    squeeze = X.ndim == 1
    if squeeze:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DataError(f"expected {model.n_features} features, "
                        f"got shape {X.shape}")
    if not np.isfinite(X).all():
        raise DataError("features contain non-finite values")
    if model.normalization is not None:
        X = apply_normalization(model.normalization, X)
    return np.ascontiguousarray(X), squeeze


def predict_batch(model, X):
    """Predicted class ids and per-class scores for rows of X.

    Score ties resolve to the lowest class id.
    """
    if isinstance(model, LinearBaselineModel):
        Xn, _ = _prepare_features(model, X)
        scores = Xn @ model.weights.T + model.biases
    else:
        Xn, _ = _prepare_features(model, X)
        delta, base = model.scorer()
        scores = np.empty((Xn.shape[0], model.n_classes))
        core.predict_scores(Xn, model.bank.feature_indices,
                            model.bank.thresholds, delta, base, scores)
    return np.argmax(scores, axis=1), scores


def predict(model, x):
    """Single-sample prediction: (class_id, scores)."""
    classes, scores = predict_batch(model, np.asarray(x, np.float64)[None, :])
    return int(classes[0]), scores[0]


def evaluate(model, dataset):
    """Accuracy and per-class recall of a model on a labeled dataset."""
    classes, _ = predict_batch(model, dataset.features)
    correct = classes == dataset.labels
    acc = float(correct.mean())
    per_class = []
    for c in range(dataset.n_classes):
        mask = dataset.labels == c
        per_class.append(float(correct[mask].mean()) if mask.any() else float("nan"))
    present = [v for v in per_class if v == v]
    return {"accuracy": acc, "per_class": per_class,
            "mean_per_class": float(np.mean(present))}


TRAINERS = {
    "mbkl": train,
    "theta1": train_theta1_baseline,
    "l1bits": train_l1_bits_baseline,
    "linear": train_linear_baseline,
}


def train_baseline(dataset, cfg, baseline):
    try:
        fn = TRAINERS[baseline]
    except KeyError:
        raise DataError(f"unknown baseline {baseline!r}; expected one of "
                        f"{sorted(TRAINERS)}") from None
    return fn(dataset, cfg)
