"""Pure Python/numpy versions of the compiled kernels in ``_kernels.pyx``.

Used when the extension is not built, or when ``ASRFORGE_PURE=1``.
"""

import numpy as np


def ctc_forward_backward(logp, ext, blank):
    T = logp.shape[0]
    S = ext.shape[0]
    emit = logp[:, ext]  # T x S
    # skip[s]: transition s-2 -> s allowed
    skip = np.zeros(S, dtype=bool)
    if S > 2:
        skip[2:] = (ext[2:] != blank) & (ext[2:] != ext[:-2])

    alpha = np.full((T, S), -np.inf)
    beta = np.full((T, S), -np.inf)
    alpha[0, 0] = emit[0, 0]
    if S > 1:
        alpha[0, 1] = emit[0, 1]

    with np.errstate(invalid="ignore"):
        for t in range(1, T):
            prev = alpha[t - 1]
            v = prev.copy()
            v[1:] = np.logaddexp(v[1:], prev[:-1])
            v[2:] = np.where(skip[2:], np.logaddexp(v[2:], prev[:-2]), v[2:])
            alpha[t] = v + emit[t]

        beta[T - 1, S - 1] = 0.0
        if S > 1:
            beta[T - 1, S - 2] = 0.0
        for t in range(T - 2, -1, -1):
            nxt = beta[t + 1] + emit[t + 1]
            v = nxt.copy()
            v[:-1] = np.logaddexp(v[:-1], nxt[1:])
            v[:-2] = np.where(skip[2:], np.logaddexp(v[:-2], nxt[2:]), v[:-2])
            beta[t] = v

    if S > 1:
        log_prob = float(np.logaddexp(alpha[T - 1, S - 1], alpha[T - 1, S - 2]))
    else:
        log_prob = float(alpha[T - 1, 0])
    return alpha, beta, log_prob


def edit_distance_ops(ref, hyp):
    n, m = len(ref), len(hyp)
    dp = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        dp[i][0] = i
    for j in range(m + 1):
        dp[0][j] = j
    for i in range(1, n + 1):
        row, up = dp[i], dp[i - 1]
        r = ref[i - 1]
        for j in range(1, m + 1):
            row[j] = min(up[j - 1] + (r != hyp[j - 1]), up[j] + 1, row[j - 1] + 1)

    S = I = D = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dp[i][j] == dp[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]):
            S += ref[i - 1] != hyp[j - 1]
            i -= 1
            j -= 1
        elif i > 0 and dp[i][j] == dp[i - 1][j] + 1:
            D += 1
            i -= 1
        else:
            I += 1
            j -= 1
    return dp[n][m], int(S), I, D


def polyphase_resample(x, table, up, down, out_len):
    ntaps = table.shape[1]
    half = ntaps // 2
    pos = np.arange(out_len, dtype=np.int64) * down
    base = pos // up
    phase = pos % up
    idx = base[:, None] - half + 1 + np.arange(ntaps)[None, :]
    padded = np.concatenate([np.zeros(ntaps), x, np.zeros(ntaps)])
    taps = padded[np.clip(idx + ntaps, 0, len(padded) - 1)]
    return np.einsum("nj,nj->n", taps, table[phase])
