# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: stump evaluation, bit packing, popcount reductions,
the per-sample predictor, and the solver iteration loops.

Semantics must stay interchangeable with the numpy fallback in _core_py; the
backend tests compare the two on every function here.
"""

from libc.math cimport sqrt, fabs
from libc.stdlib cimport malloc, free

cdef extern from *:
    """
    #include <stdint.h>
    static inline int popcount64(uint64_t x) { return __builtin_popcountll(x); }
    """
    int popcount64(unsigned long long x) nogil

NAME = "compiled"


def eval_pack_stumps(const double[:, ::1] X, const unsigned int[::1] idx,
                     const double[::1] thr, unsigned long long[:, ::1] out):
    """Pack stump outputs stump-major: bit j of out[k] is X[j, idx[k]] > thr[k]."""
    cdef Py_ssize_t K = idx.shape[0], N = X.shape[0], W = out.shape[1]
    cdef Py_ssize_t k, j, w
    cdef unsigned int col
    cdef double t
    cdef unsigned long long acc
    with nogil:
        for k in range(K):
            col = idx[k]
            t = thr[k]
            acc = 0
            w = 0
            for j in range(N):
                if X[j, col] > t:
                    acc |= (<unsigned long long> 1) << (j & 63)
                if (j & 63) == 63:
                    out[k, w] = acc
                    acc = 0
                    w += 1
            if w < W:
                out[k, w] = acc
                w += 1
            while w < W:
                out[k, w] = 0
                w += 1


def eval_pack_samples(const double[:, ::1] X, const unsigned int[::1] idx,
                      const double[::1] thr, unsigned long long[:, ::1] out):
    """Pack stump outputs sample-major: bit k of out[j] is X[j, idx[k]] > thr[k]."""
    cdef Py_ssize_t K = idx.shape[0], N = X.shape[0], W = out.shape[1]
    cdef Py_ssize_t k, j, w
    cdef unsigned long long acc
    with nogil:
        for j in range(N):
            acc = 0
            w = 0
            for k in range(K):
                if X[j, idx[k]] > thr[k]:
                    acc |= (<unsigned long long> 1) << (k & 63)
                if (k & 63) == 63:
                    out[j, w] = acc
                    acc = 0
                    w += 1
            if w < W:
                out[j, w] = acc
                w += 1
            while w < W:
                out[j, w] = 0
                w += 1


def popcount_rows(const unsigned long long[:, ::1] words, long long[::1] out):
    cdef Py_ssize_t K = words.shape[0], W = words.shape[1]
    cdef Py_ssize_t k, w
    cdef long long s
    with nogil:
        for k in range(K):
            s = 0
            for w in range(W):
                s += popcount64(words[k, w])
            out[k] = s


def popcount_rows_and(const unsigned long long[:, ::1] words,
                      const unsigned long long[:, ::1] masks,
                      long long[:, ::1] out):
    """out[c, k] = popcount(words[k] & masks[c]); used for per-class counts."""
    cdef Py_ssize_t K = words.shape[0], W = words.shape[1], C = masks.shape[0]
    cdef Py_ssize_t c, k, w
    cdef long long s
    with nogil:
        for c in range(C):
            for k in range(K):
                s = 0
                for w in range(W):
                    s += popcount64(words[k, w] & masks[c, w])
                out[c, k] = s


def hamming_gram(const unsigned long long[:, ::1] words, long long[:, ::1] out):
    """Pairwise Hamming distance between packed rows (symmetric, zero diagonal)."""
    cdef Py_ssize_t N = words.shape[0], W = words.shape[1]
    cdef Py_ssize_t i, j, w
    cdef long long h
    with nogil:
        for i in range(N):
            out[i, i] = 0
            for j in range(i + 1, N):
                h = 0
                for w in range(W):
                    h += popcount64(words[i, w] ^ words[j, w])
                out[i, j] = h
                out[j, i] = h


def pair_hamming(const unsigned long long[::1] a, const unsigned long long[::1] b):
    cdef Py_ssize_t W = a.shape[0]
    cdef Py_ssize_t w
    cdef long long h = 0
    with nogil:
        for w in range(W):
            h += popcount64(a[w] ^ b[w])
    return h


def predict_scores(const double[:, ::1] X, const unsigned int[::1] idx,
                   const double[::1] thr, const double[:, ::1] delta,
                   const double[::1] base, double[:, ::1] out):
    """Per-class scores for a batch: out[j, c] = base[c] + sum_k bit_jk * delta[c, k]."""
    cdef Py_ssize_t N = X.shape[0], K = idx.shape[0], C = delta.shape[0]
    cdef Py_ssize_t j, k, c
    cdef double s
    cdef unsigned char *buf = <unsigned char *> malloc(K if K > 0 else 1)
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for j in range(N):
                for k in range(K):
                    buf[k] = X[j, idx[k]] > thr[k]
                for c in range(C):
                    s = base[c]
                    for k in range(K):
                        if buf[k]:
                            s += delta[c, k]
                    out[j, c] = s
    finally:
        free(buf)


cdef void _project_box_hyperplane(double *a, const double *v, const double *y,
                                  double C, Py_ssize_t N) nogil:
    """a = argmin ||a - v|| over [0, C]^N intersect {y.a = 0} (y entries +-1).

    Bisection on the hyperplane multiplier down to a linear segment of the
    piecewise-linear crossing equation, then an exact linear solve.
    """
    cdef double lo = 0.0, hi = 0.0, vm = 0.0, lam, glo, ghi, gmid, mid, ai
    cdef Py_ssize_t i, it
    for i in range(N):
        if fabs(v[i]) > vm:
            vm = fabs(v[i])
    lo = -(vm + C + 1.0)
    hi = vm + C + 1.0
    glo = 0.0
    ghi = 0.0
    for i in range(N):
        ai = v[i] - lo * y[i]
        if ai < 0.0:
            ai = 0.0
        elif ai > C:
            ai = C
        glo += y[i] * ai
        ai = v[i] - hi * y[i]
        if ai < 0.0:
            ai = 0.0
        elif ai > C:
            ai = C
        ghi += y[i] * ai
    for it in range(100):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        gmid = 0.0
        for i in range(N):
            ai = v[i] - mid * y[i]
            if ai < 0.0:
                ai = 0.0
            elif ai > C:
                ai = C
            gmid += y[i] * ai
        if gmid > 0.0:
            lo = mid
            glo = gmid
        else:
            hi = mid
            ghi = gmid
    if glo != ghi:
        lam = lo + (hi - lo) * glo / (glo - ghi)
        if lam < lo:
            lam = lo
        elif lam > hi:
            lam = hi
    else:
        lam = lo
    for i in range(N):
        ai = v[i] - lam * y[i]
        if ai < 0.0:
            ai = 0.0
        elif ai > C:
            ai = C
        a[i] = ai


def l2_apgd_chunk(const double[:, ::1] Z, const double[::1] y,
                  double[::1] alpha, double[::1] beta, double[::1] tmom,
                  double step, double C, int n_iter,
                  double[::1] wbuf, double[::1] gbuf, double[::1] anew):
    """Run n_iter accelerated projected gradient steps on the box-hyperplane
    dual of the squared-norm hinge problem. State (alpha, beta, tmom) updates
    in place; wbuf/gbuf/anew are caller-provided scratch."""
    cdef Py_ssize_t N = Z.shape[0], m = Z.shape[1]
    cdef Py_ssize_t i, jm, it
    cdef double t = tmom[0], tnew, mom, s, bi
    with nogil:
        for it in range(n_iter):
            for jm in range(m):
                wbuf[jm] = 0.0
            for i in range(N):
                bi = beta[i]
                if bi != 0.0:
                    for jm in range(m):
                        wbuf[jm] += bi * Z[i, jm]
            for i in range(N):
                s = 0.0
                for jm in range(m):
                    s += Z[i, jm] * wbuf[jm]
                gbuf[i] = 1.0 - s
            for i in range(N):
                anew[i] = beta[i] + step * gbuf[i]
            _project_box_hyperplane(&anew[0], &anew[0], &y[0], C, N)
            s = 0.0
            for i in range(N):
                s += gbuf[i] * (anew[i] - alpha[i])
            if s < 0.0:
                t = 1.0
            tnew = 0.5 * (1.0 + sqrt(1.0 + 4.0 * t * t))
            mom = (t - 1.0) / tnew
            for i in range(N):
                beta[i] = anew[i] + mom * (anew[i] - alpha[i])
                alpha[i] = anew[i]
            t = tnew
    tmom[0] = t


def l1_pdhg_chunk(const double[:, ::1] A, double[::1] u, double[::1] ubar,
                  double[::1] p, const double[::1] tau, const double[::1] sig,
                  double C, int n_theta, int n_iter, double[::1] atp):
    """Run n_iter primal-dual steps for the L1-regularized hinge problem.

    Dual clip against the extrapolated primal first, then the primal
    shrink. Columns of A beyond n_theta (the bias) skip the shrink."""
    cdef Py_ssize_t N = A.shape[0], M = A.shape[1]
    cdef Py_ssize_t i, jm, it
    cdef double q, v, unew, pi
    with nogil:
        for it in range(n_iter):
            for i in range(N):
                q = 0.0
                for jm in range(M):
                    q += A[i, jm] * ubar[jm]
                q = p[i] + sig[i] * (q - 1.0)
                if q < -C:
                    q = -C
                elif q > 0.0:
                    q = 0.0
                p[i] = q
            for jm in range(M):
                atp[jm] = 0.0
            for i in range(N):
                pi = p[i]
                if pi != 0.0:
                    for jm in range(M):
                        atp[jm] += pi * A[i, jm]
            for jm in range(M):
                v = u[jm] - tau[jm] * atp[jm]
                if jm < n_theta:
                    if v > tau[jm]:
                        unew = v - tau[jm]
                    elif v < -tau[jm]:
                        unew = v + tau[jm]
                    else:
                        unew = 0.0
                else:
                    unew = v
                ubar[jm] = 2.0 * unew - u[jm]
                u[jm] = unew
