"""Numba kernels for skip-gram with negative sampling."""

import numpy as np
from numba import njit, prange

_LCG_MUL = np.uint64(25214903917)
_LCG_ADD = np.uint64(11)


@njit(cache=True, inline="always")
def _next(state):
    return state * _LCG_MUL + _LCG_ADD


@njit(cache=True, inline="always")
def _uniform(state):
    return (state >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True, fastmath=True)
def _train_docs(tokens, doc_ptr, d_lo, d_hi, W_in, W_out, cum_neg, window, negatives,
                lr0, total_words, word_offset, state, neu1e, out):
    """Train on documents ``[d_lo, d_hi)``; returns (loss sum, pair count, words, state)."""
    V, D = W_in.shape
    loss = 0.0
    pairs = 0
    words = 0
    for doc in range(d_lo, d_hi):
        lo = doc_ptr[doc]
        hi = doc_ptr[doc + 1]
        for i in range(lo, hi):
            lr = lr0 * max(1.0 - (word_offset + words) / (total_words + 1.0), 1e-4)
            words += 1
            c = tokens[i]
            for j in range(max(lo, i - window), min(hi, i + window + 1)):
                if j == i:
                    continue
                o = tokens[j]
                for d in range(D):
                    neu1e[d] = np.float32(0.0)
                for s in range(negatives + 1):
                    if s == 0:
                        t = o
                        label = 1.0
                    else:
                        state = _next(state)
                        t = np.searchsorted(cum_neg, _uniform(state) * cum_neg[V - 1], "right")
                        if t >= V:
                            t = V - 1
                        if t == o:
                            continue
                        label = 0.0
                    f = np.float32(0.0)
                    for d in range(D):
                        f += W_in[c, d] * W_out[t, d]
                    if f > 30.0:
                        sig = 1.0
                        lp = 0.0 if label == 1.0 else f
                    elif f < -30.0:
                        sig = 0.0
                        lp = -f if label == 1.0 else 0.0
                    else:
                        sig = 1.0 / (1.0 + np.exp(-f))
                        lp = np.log1p(np.exp(-f)) if label == 1.0 else np.log1p(np.exp(f))
                    loss += lp
                    g = np.float32((label - sig) * lr)
                    for d in range(D):
                        neu1e[d] += g * W_out[t, d]
                        W_out[t, d] += g * W_in[c, d]
                for d in range(D):
                    W_in[c, d] += neu1e[d]
                pairs += 1
    out[0] = loss
    out[1] = pairs
    out[2] = words
    return state


@njit(cache=True)
def train_serial(tokens, doc_ptr, W_in, W_out, cum_neg, window, negatives, epochs, lr0, seed):
    n_docs = doc_ptr.shape[0] - 1
    total = tokens.shape[0] * epochs
    losses = np.zeros(epochs)
    state = np.uint64(seed)
    neu1e = np.zeros(W_in.shape[1], np.float32)
    out = np.zeros(3)
    done = 0
    for ep in range(epochs):
        state = _train_docs(tokens, doc_ptr, 0, n_docs, W_in, W_out, cum_neg, window, negatives,
                            lr0, total, done, state, neu1e, out)
        done += int(out[2])
        losses[ep] = out[0] / max(out[1], 1.0)
    return losses


@njit(cache=True, parallel=True)
def train_parallel(tokens, doc_ptr, W_in, W_out, cum_neg, window, negatives, epochs, lr0, seed,
                   n_chunks):
    """Lock-free concurrent updates over document chunks; not bit-reproducible."""
    n_docs = doc_ptr.shape[0] - 1
    n_tok = tokens.shape[0]
    total = n_tok * epochs
    losses = np.zeros(epochs)
    bounds = np.linspace(0, n_docs, n_chunks + 1).astype(np.int64)
    states = np.empty(n_chunks, np.uint64)
    for k in range(n_chunks):
        states[k] = np.uint64(seed) + np.uint64(k) * np.uint64(0x9E3779B97F4A7C15)
    for ep in range(epochs):
        stats = np.zeros((n_chunks, 3))
        for k in prange(n_chunks):
            neu1e = np.zeros(W_in.shape[1], np.float32)
            offset = ep * n_tok + doc_ptr[bounds[k]]
            states[k] = _train_docs(tokens, doc_ptr, bounds[k], bounds[k + 1], W_in, W_out,
                                    cum_neg, window, negatives, lr0, total, offset, states[k],
                                    neu1e, stats[k])
        losses[ep] = stats[:, 0].sum() / max(stats[:, 1].sum(), 1.0)
    return losses
