"""Numpy fallback for the compiled core.

Every public function here mirrors a function in the compiled extension with
identical semantics (same packing layout, same iteration math), so the two
are interchangeable behind the backend selector. Packed layouts assume a
little-endian platform, which matches the model container byte order.
"""

import math

import numpy as np

NAME = "fallback"


def _pack_rows(bits, n_words):
    """Pack a boolean (R, n) array row-wise into (R, n_words) uint64 words.

    Bit j of a row lands in word j >> 6 at position j & 63.
    """
    packed = np.packbits(bits, axis=1, bitorder="little")
    want = n_words * 8
    if packed.shape[1] < want:
        pad = np.zeros((packed.shape[0], want - packed.shape[1]), np.uint8)
        packed = np.concatenate([packed, pad], axis=1)
    return packed.view(np.uint64)


def eval_pack_stumps(X, idx, thr, out):
    bits = (X[:, idx] > thr).T
    out[:] = _pack_rows(np.ascontiguousarray(bits), out.shape[1])


def eval_pack_samples(X, idx, thr, out):
    bits = X[:, idx] > thr
    out[:] = _pack_rows(np.ascontiguousarray(bits), out.shape[1])


def popcount_rows(words, out):
    out[:] = np.bitwise_count(words).sum(axis=1, dtype=np.int64)


def popcount_rows_and(words, masks, out):
    for c in range(masks.shape[0]):
        out[c] = np.bitwise_count(words & masks[c]).sum(axis=1, dtype=np.int64)


def hamming_gram(words, out):
    n = words.shape[0]
    for i in range(n):
        out[i, i] = 0
        if i + 1 < n:
            h = np.bitwise_count(words[i + 1:] ^ words[i]).sum(axis=1,
                                                               dtype=np.int64)
            out[i, i + 1:] = h
            out[i + 1:, i] = h


def pair_hamming(a, b):
    return int(np.bitwise_count(a ^ b).sum(dtype=np.int64))


def predict_scores(X, idx, thr, delta, base, out):
    bits = (X[:, idx] > thr).astype(np.float64)
    np.matmul(bits, delta.T, out=out)
    out += base


def project_box_hyperplane(v, y, C):
    """Euclidean projection of v onto [0, C]^n intersected with {y.a = 0}.

    y entries are +-1. Exact sweep over the breakpoints of the
    piecewise-linear multiplier equation g(lam) = sum_i y_i clip(v_i - lam y_i).
    """
    v = np.asarray(v, np.float64)
    y = np.asarray(y, np.float64)
    n = v.size
    if n == 0:
        return np.zeros(0)
    yv = y * v
    pos = y > 0
    lo = yv - np.where(pos, C, 0.0)
    hi = lo + C
    npos = int(pos.sum())
    posns = np.concatenate([lo, hi])
    dF = np.concatenate([np.ones(n), -np.ones(n)])
    dS = np.concatenate([yv, -yv])
    dB = np.concatenate([np.where(pos, -C, 0.0), np.where(pos, 0.0, -C)])
    order = np.argsort(posns, kind="stable")
    ps = posns[order]
    F = np.cumsum(dF[order])
    S = np.cumsum(dS[order])
    B = C * npos + np.cumsum(dB[order])
    last = np.ones(2 * n, bool)
    last[:-1] = ps[:-1] != ps[1:]
    pi = ps[last]
    Fi = F[last]
    Si = S[last]
    Bi = B[last]
    g = Bi + Si - pi * Fi
    below = np.nonzero(g <= 0.0)[0]
    if below.size == 0:
        lam = pi[-1]
    else:
        e = int(below[0])
        if e == 0:
            lam = pi[0]
        else:
            Fp = Fi[e - 1]
            if Fp > 0:
                lam = (Bi[e - 1] + Si[e - 1]) / Fp
            else:
                lam = pi[e]
            lam = min(max(lam, pi[e - 1]), pi[e])
    return np.clip(v - lam * y, 0.0, C)


def l2_apgd_chunk(Z, y, alpha, beta, tmom, step, C, n_iter, wbuf, gbuf, anew):
    t = tmom[0]
    for _ in range(n_iter):
        np.matmul(Z.T, beta, out=wbuf)
        gbuf[:] = 1.0 - Z @ wbuf
        anew[:] = project_box_hyperplane(beta + step * gbuf, y, C)
        if float(gbuf @ (anew - alpha)) < 0.0:
            t = 1.0
        tnew = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        mom = (t - 1.0) / tnew
        beta[:] = anew + mom * (anew - alpha)
        alpha[:] = anew
        t = tnew
    tmom[0] = t


def l1_pdhg_chunk(A, u, ubar, p, tau, sig, C, n_theta, n_iter, atp):
    for _ in range(n_iter):
        q = p + sig * (A @ ubar - 1.0)
        np.clip(q, -C, 0.0, out=p)
        np.matmul(A.T, p, out=atp)
        v = u - tau * atp
        unew = v.copy()
        head = v[:n_theta]
        unew[:n_theta] = np.sign(head) * np.maximum(np.abs(head) - tau[:n_theta],
                                                    0.0)
        ubar[:] = 2.0 * unew - u
        u[:] = unew
