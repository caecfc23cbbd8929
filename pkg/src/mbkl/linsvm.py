"""Linear SVM solvers: squared-norm and L1-regularized hinge, bias unregularized.

Both solvers are deterministic first-order methods with a computable duality
gap, so convergence is certified rather than assumed:

- train_l2 runs accelerated projected gradient ascent on the dual (box
  constraints intersected with the bias hyperplane; the projection is exact).
- train_l1 runs a primal-dual (Chambolle-Pock style) iteration whose dual
  iterate is projected to a feasible multiplier for the certificate.

The bias is recovered exactly for any fixed weight vector by minimizing the
piecewise-linear hinge sum over its breakpoints, which also makes the
degenerate single-class case exact. Non-convergence within the iteration
budget returns the best iterate found, flagged and logged, never an error.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from ._backend import core
from ._core_py import project_box_hyperplane
from .errors import DataError

log = logging.getLogger(__name__)

_CHECK_EVERY = 50


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings: C > 0, relative gap tolerance, iteration cap.

    The methods are deterministic; seed is part of the interface for
    reproducibility bookkeeping and does not influence the result.
    """

    C: float = 1.0
    tol: float = 1e-5
    max_epochs: int = 20000
    seed: int = 0

    def __post_init__(self):
        if not (self.C > 0 and math.isfinite(self.C)):
            raise DataError("C must be positive and finite")
        if not (self.tol > 0):
            raise DataError("tol must be positive")
        if self.max_epochs < 1:
            raise DataError("max_epochs must be at least 1")


@dataclass(frozen=True)
class LinearModel:
    """Trained linear classifier: sign(x . weights + bias).

    objective is the primal value at (weights, bias); gap is the certified
    distance to the optimum (0 when exact).
    """

    weights: np.ndarray
    bias: float
    objective: float
    converged: bool
    gap: float
    iterations: int


def decision_values(model, X):
    X = np.asarray(X, np.float64)
    if X.ndim != 2 or X.shape[1] != model.weights.shape[0]:
        raise DataError(f"expected {model.weights.shape[0]} features, "
                        f"got shape {X.shape}")
    return X @ model.weights + model.bias


def best_bias(scores, y):
    """Exact argmin over b of sum_i hinge(1 - y_i (scores_i + b)).

    Returns (b, hinge_sum). The objective is piecewise linear in b with
    breakpoints y_i - scores_i; a flat optimal interval resolves to its
    midpoint, or to the finite endpoint when unbounded on one side.
    """
    y = np.asarray(y, np.float64)
    t = y - scores
    order = np.argsort(t, kind="stable")
    ts = t[order]
    is_pos = y[order] > 0
    n = ts.size
    p_total = int(is_pos.sum())
    p_cum = np.cumsum(is_pos)
    n_cum = np.cumsum(~is_pos)
    # slope of the hinge sum on the open segment right of ts[j]
    slopes = -(p_total - p_cum) + n_cum
    if p_total == 0:
        b = ts[0]
    else:
        j = int(np.argmax(slopes >= 0))  # first nonnegative; exists
        if slopes[j] > 0:
            b = ts[j]
        elif j == n - 1:
            b = ts[n - 1]
        else:
            b = 0.5 * (ts[j] + ts[j + 1])
    h = float(np.maximum(0.0, 1.0 - y * (scores + b)).sum())
    return float(b), h


def _validate_xy(X, y):
    X = np.ascontiguousarray(np.asarray(X, np.float64))
    y = np.asarray(y, np.float64)
    if X.ndim != 2:
        raise DataError("features must be a 2-D array")
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise DataError("labels must be 1-D and match the sample count")
    if X.shape[0] == 0:
        raise DataError("need at least one training sample")
    if not np.isfinite(X).all():
        raise DataError("features contain non-finite values")
    if not np.isin(y, (-1.0, 1.0)).all():
        raise DataError("labels must be +1 or -1")
    return X, y


def _single_class_model(m, y):
    b = 1.0 if (y > 0).all() else -1.0
    return LinearModel(np.zeros(m), b, 0.0, True, 0.0, 0)


def _spectral_norm_sq(Z):
    """Deterministic power-iteration estimate of ||Z||_2^2 (safety-margined)."""
    n, m = Z.shape
    if n == 0 or m == 0:
        return 0.0
    small = min(n, m)
    v = 1.0 + 0.01 * np.sin(np.arange(small, dtype=np.float64))
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(200):
        if m <= n:
            w = Z.T @ (Z @ v)
        else:
            w = Z @ (Z.T @ v)
        nrm = float(np.linalg.norm(w))
        if nrm == 0.0:
            return 0.0
        new = float(v @ w)
        v = w / nrm
        if abs(new - lam) <= 1e-10 * max(1.0, new):
            lam = new
            break
        lam = new
    return lam * 1.05 + 1e-12


def train_l2(X, y, cfg, *, allow_single_class=False, warm_start=None,
             return_state=False):
    """Minimize 0.5||w||^2 + C sum_i hinge(1 - y_i (x_i.w + b)).

    warm_start accepts the dual state returned via return_state to speed up
    a related solve (e.g. the next C on a grid).
    """
    X, y = _validate_xy(X, y)
    N, m = X.shape
    C = cfg.C
    if not ((y > 0).any() and (y < 0).any()):
        if not allow_single_class:
            raise DataError("training labels contain a single class")
        model = _single_class_model(m, y)
        return (model, np.zeros(N)) if return_state else model
    if m == 0:
        b, h = best_bias(np.zeros(N), y)
        model = LinearModel(np.zeros(0), b, C * h, True, 0.0, 0)
        return (model, np.zeros(N)) if return_state else model

    Z = np.ascontiguousarray(X * y[:, None])
    L = _spectral_norm_sq(Z)
    step = 1.0 / max(L, 1e-12)

    if warm_start is not None and warm_start.shape == (N,):
        alpha = project_box_hyperplane(np.clip(warm_start, 0.0, C), y, C)
    else:
        alpha = np.zeros(N)
    beta = alpha.copy()
    tmom = np.array([1.0])
    wbuf = np.empty(m)
    gbuf = np.empty(N)
    anew = np.empty(N)

    b0, h0 = best_bias(np.zeros(N), y)
    best_P = C * h0
    best_w = np.zeros(m)
    best_b = b0
    D_best = 0.0
    iters = 0
    converged = False
    gap = best_P
    while iters < cfg.max_epochs:
        n = min(_CHECK_EVERY, cfg.max_epochs - iters)
        core.l2_apgd_chunk(Z, y, alpha, beta, tmom, step, C, n,
                           wbuf, gbuf, anew)
        iters += n
        if not np.isfinite(alpha).all():
            # spectral estimate was too optimistic; back off and restart
            step *= 0.25
            alpha[:] = 0.0
            beta[:] = 0.0
            tmom[0] = 1.0
            continue
        w = Z.T @ alpha
        D = float(alpha.sum() - 0.5 * (w @ w))
        b, h = best_bias(X @ w, y)
        P = float(0.5 * (w @ w) + C * h)
        if P < best_P:
            best_P, best_w, best_b = P, w.copy(), b
        D_best = max(D_best, D)
        gap = best_P - D_best
        if gap <= cfg.tol * max(1.0, abs(best_P)):
            converged = True
            break
    if not converged:
        log.warning("squared-norm hinge solver stopped at iteration cap "
                    "%d with relative gap %.3g", iters,
                    gap / max(1.0, abs(best_P)))
    model = LinearModel(best_w, float(best_b), best_P, converged,
                        max(gap, 0.0), iters)
    return (model, alpha.copy()) if return_state else model


def train_l1(X, y, cfg, *, allow_single_class=False, warm_start=None,
             return_state=False):
    """Minimize ||w||_1 + C sum_i hinge(1 - y_i (x_i.w + b)).

    Exact zeros in the returned weights come from the proximal shrink, so
    sparsity is structural, not thresholded.
    """
    X, y = _validate_xy(X, y)
    N, m = X.shape
    C = cfg.C
    if not ((y > 0).any() and (y < 0).any()):
        if not allow_single_class:
            raise DataError("training labels contain a single class")
        model = _single_class_model(m, y)
        return (model, (np.zeros(m + 1), np.zeros(N))) if return_state else model
    if m == 0:
        b, h = best_bias(np.zeros(N), y)
        model = LinearModel(np.zeros(0), b, C * h, True, 0.0, 0)
        return (model, (np.zeros(1), np.zeros(N))) if return_state else model

    Z = X * y[:, None]
    A = np.ascontiguousarray(np.concatenate([Z, y[:, None]], axis=1))
    norm_sq = _spectral_norm_sq(A)
    scale = math.sqrt(max(norm_sq, 1e-12))
    tau = np.full(m + 1, 0.99 / scale)
    sig = np.full(N, 1.0 / scale)

    if warm_start is not None:
        u = np.array(warm_start[0], np.float64, copy=True)
        p = np.clip(np.asarray(warm_start[1], np.float64), -C, 0.0)
        if u.shape != (m + 1,) or p.shape != (N,):
            raise DataError("warm start shape mismatch")
    else:
        u = np.zeros(m + 1)
        p = np.zeros(N)
    ubar = u.copy()
    atp = np.empty(m + 1)

    b0, h0 = best_bias(np.zeros(N), y)
    best_P = C * h0
    best_w = np.zeros(m)
    best_b = b0
    D_best = 0.0
    iters = 0
    converged = False
    gap = best_P
    while iters < cfg.max_epochs:
        n = min(_CHECK_EVERY, cfg.max_epochs - iters)
        core.l1_pdhg_chunk(A, u, ubar, p, tau, sig, C, m, n, atp)
        iters += n
        if not np.isfinite(u).all():
            u[:] = 0.0
            ubar[:] = 0.0
            p[:] = 0.0
            continue
        w = u[:m]
        b, h = best_bias(X @ w, y)
        P = float(np.abs(w).sum() + C * h)
        if P < best_P:
            best_P, best_w, best_b = P, w.copy(), b
        ac = project_box_hyperplane(-p, y, C)
        v = X.T @ (y * ac)
        vn = float(np.abs(v).max()) if m else 0.0
        D = float(ac.sum()) * (1.0 if vn <= 1.0 else 1.0 / vn)
        D_best = max(D_best, D)
        gap = best_P - D_best
        if gap <= cfg.tol * max(1.0, abs(best_P)):
            converged = True
            break
    if not converged:
        log.warning("L1 hinge solver stopped at iteration cap %d with "
                    "relative gap %.3g", iters, gap / max(1.0, abs(best_P)))
    model = LinearModel(best_w, float(best_b), best_P, converged,
                        max(gap, 0.0), iters)
    return (model, (u.copy(), p.copy())) if return_state else model
