# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Signatures mirror asrforge._pykernels exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, INFINITY

cnp.import_array()


cdef inline double _lse2(double a, double b) nogil:
    cdef double m
    if a == -INFINITY:
        return b
    if b == -INFINITY:
        return a
    if a > b:
        return a + log(1.0 + exp(b - a))
    return b + log(1.0 + exp(a - b))


def ctc_forward_backward(const double[:, ::1] logp, const long long[::1] ext, int blank):
    """Log-space alpha/beta over the blank-extended label sequence.

    beta[t, s] excludes the emission at frame t, so alpha + beta - logP is the
    log posterior of occupying state s at frame t.
    """
    cdef Py_ssize_t T = logp.shape[0]
    cdef Py_ssize_t S = ext.shape[0]
    cdef Py_ssize_t t, s
    cdef double v
    alpha_np = np.full((T, S), -np.inf)
    beta_np = np.full((T, S), -np.inf)
    cdef double[:, ::1] alpha = alpha_np
    cdef double[:, ::1] beta = beta_np

    with nogil:
        alpha[0, 0] = logp[0, ext[0]]
        if S > 1:
            alpha[0, 1] = logp[0, ext[1]]
        for t in range(1, T):
            for s in range(S):
                v = alpha[t - 1, s]
                if s >= 1:
                    v = _lse2(v, alpha[t - 1, s - 1])
                if s >= 2 and ext[s] != blank and ext[s] != ext[s - 2]:
                    v = _lse2(v, alpha[t - 1, s - 2])
                if v != -INFINITY:
                    alpha[t, s] = v + logp[t, ext[s]]

        beta[T - 1, S - 1] = 0.0
        if S > 1:
            beta[T - 1, S - 2] = 0.0
        for t in range(T - 2, -1, -1):
            for s in range(S):
                v = beta[t + 1, s] + logp[t + 1, ext[s]]
                if s + 1 < S:
                    v = _lse2(v, beta[t + 1, s + 1] + logp[t + 1, ext[s + 1]])
                if s + 2 < S and ext[s + 2] != blank and ext[s + 2] != ext[s]:
                    v = _lse2(v, beta[t + 1, s + 2] + logp[t + 1, ext[s + 2]])
                beta[t, s] = v

    if S > 1:
        log_prob = _lse2(alpha[T - 1, S - 1], alpha[T - 1, S - 2])
    else:
        log_prob = alpha[T - 1, 0]
    return alpha_np, beta_np, log_prob


def edit_distance_ops(const long long[::1] ref, const long long[::1] hyp):
    """Unit-cost Levenshtein distance plus (S, I, D) from one backtrace.

    Backtrace prefers the diagonal (match/substitution) on ties.
    """
    cdef Py_ssize_t n = ref.shape[0]
    cdef Py_ssize_t m = hyp.shape[0]
    cdef Py_ssize_t i, j
    cdef long long sub, ins, dele, best
    cdef long long S = 0, I = 0, D = 0
    dp_np = np.zeros((n + 1, m + 1), dtype=np.int64)
    cdef long long[:, ::1] dp = dp_np

    with nogil:
        for i in range(n + 1):
            dp[i, 0] = i
        for j in range(m + 1):
            dp[0, j] = j
        for i in range(1, n + 1):
            for j in range(1, m + 1):
                sub = dp[i - 1, j - 1] + (0 if ref[i - 1] == hyp[j - 1] else 1)
                dele = dp[i - 1, j] + 1
                ins = dp[i, j - 1] + 1
                best = sub
                if dele < best:
                    best = dele
                if ins < best:
                    best = ins
                dp[i, j] = best

        i = n
        j = m
        while i > 0 or j > 0:
            if i > 0 and j > 0 and dp[i, j] == dp[i - 1, j - 1] + (0 if ref[i - 1] == hyp[j - 1] else 1):
                if ref[i - 1] != hyp[j - 1]:
                    S += 1
                i -= 1
                j -= 1
            elif i > 0 and dp[i, j] == dp[i - 1, j] + 1:
                D += 1
                i -= 1
            else:
                I += 1
                j -= 1

    return int(dp[n, m]), int(S), int(I), int(D)


def polyphase_resample(const double[::1] x, const double[:, ::1] table,
                       long long up, long long down, Py_ssize_t out_len):
    """y[n] = sum_j table[phase(n), j] * x[base(n) - half + 1 + j], zero outside x."""
    cdef Py_ssize_t ntaps = table.shape[1]
    cdef Py_ssize_t half = ntaps // 2
    cdef Py_ssize_t nx = x.shape[0]
    cdef Py_ssize_t n, j, k, base
    cdef long long pos, phase
    cdef double acc
    out_np = np.zeros(out_len)
    cdef double[::1] y = out_np

    with nogil:
        for n in range(out_len):
            pos = n * down
            base = <Py_ssize_t>(pos // up)
            phase = pos % up
            acc = 0.0
            for j in range(ntaps):
                k = base - half + 1 + j
                if 0 <= k < nx:
                    acc = acc + table[phase, j] * x[k]
            y[n] = acc
    return out_np
