"""
Hot scoring kernels.

Each kernel exists twice: a numba ``@njit`` loop version and a vectorised
numpy version.  The numba path is used when numba imports cleanly, unless the
environment variable ``CQARANK_DISABLE_NUMBA`` is set to a truthy value.
Both variants are always importable (``*_jit`` / ``*_np``) so tests and the
benchmark can compare them directly.
"""

import os

import numpy as np

__all__ = [
    'USING_NUMBA',
    'kl_accumulate',
    'bm25_accumulate',
    'smm_em',
]

_DISABLED = os.environ.get('CQARANK_DISABLE_NUMBA', '').strip().lower() in {'1', 'true', 'yes', 'on'}

try:
    from numba import njit
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    _HAVE_NUMBA = False

USING_NUMBA = _HAVE_NUMBA and not _DISABLED


# ---------------------------------------------------------------------------
# KL-divergence / Dirichlet scoring over the postings lists
# ---------------------------------------------------------------------------

def kl_accumulate_np(indptr, docs, counts, q_tids, q_weights, q_collprob, mu, doc_len):
    """
    Score every document against a query language model.

    For each query term ``w`` with weight ``q`` the seen-term contribution is
    ``q * log(1 + c(w,d) / (mu * p(w|C)))``; the document-length term
    ``log(mu / (|d| + mu))`` is added once per document at the end.
    """
    scores = np.zeros(doc_len.shape[0])
    for i in range(q_tids.shape[0]):
        t = q_tids[i]
        lo, hi = indptr[t], indptr[t + 1]
        d = docs[lo:hi]
        scores[d] += q_weights[i] * np.log1p(counts[lo:hi] / (mu * q_collprob[i]))
    scores += np.log(mu / (doc_len + mu))
    return scores


def bm25_accumulate_np(indptr, docs, counts, q_tids, q_weights, k1, b, doc_len, avg_len):
    """BM25 over postings. ``q_weights`` already folds in idf and query term count."""
    scores = np.zeros(doc_len.shape[0])
    for i in range(q_tids.shape[0]):
        t = q_tids[i]
        lo, hi = indptr[t], indptr[t + 1]
        d = docs[lo:hi]
        tf = counts[lo:hi]
        norm = k1 * (1.0 - b + b * doc_len[d] / avg_len)
        scores[d] += q_weights[i] * (tf * (k1 + 1.0)) / (tf + norm)
    return scores


def smm_em_np(counts, collprob, lam, iters):
    """
    EM for the two-component feedback mixture.

    Returns ``(theta, loglik)`` where ``loglik`` has ``iters + 1`` entries: the
    log-likelihood at the MLE initialisation followed by one per iteration.
    An update that fails to raise the likelihood (rounding noise at the fixed
    point) is discarded and the remaining entries repeat the last value.
    """
    theta = counts / counts.sum()
    loglik = np.empty(iters + 1)
    loglik[0] = np.sum(counts * np.log((1.0 - lam) * theta + lam * collprob))
    for it in range(iters):
        fg = (1.0 - lam) * theta
        z = counts * (fg / (fg + lam * collprob))
        nxt = z / z.sum()
        ll = np.sum(counts * np.log((1.0 - lam) * nxt + lam * collprob))
        if ll < loglik[it]:
            loglik[it + 1:] = loglik[it]
            break
        theta = nxt
        loglik[it + 1] = ll
    return theta, loglik


if _HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def kl_accumulate_jit(indptr, docs, counts, q_tids, q_weights, q_collprob, mu, doc_len):
        n = doc_len.shape[0]
        scores = np.zeros(n)
        for i in range(q_tids.shape[0]):
            t = q_tids[i]
            w = q_weights[i]
            denom = mu * q_collprob[i]
            for p in range(indptr[t], indptr[t + 1]):
                scores[docs[p]] += w * np.log1p(counts[p] / denom)
        for d in range(n):
            scores[d] += np.log(mu / (doc_len[d] + mu))
        return scores

    @njit(cache=True, nogil=True)
    def bm25_accumulate_jit(indptr, docs, counts, q_tids, q_weights, k1, b, doc_len, avg_len):
        scores = np.zeros(doc_len.shape[0])
        for i in range(q_tids.shape[0]):
            t = q_tids[i]
            w = q_weights[i]
            for p in range(indptr[t], indptr[t + 1]):
                d = docs[p]
                tf = counts[p]
                norm = k1 * (1.0 - b + b * doc_len[d] / avg_len)
                scores[d] += w * (tf * (k1 + 1.0)) / (tf + norm)
        return scores

    @njit(cache=True, nogil=True)
    def smm_em_jit(counts, collprob, lam, iters):
        n = counts.shape[0]
        total = 0.0
        for j in range(n):
            total += counts[j]
        theta = counts / total
        loglik = np.empty(iters + 1)
        ll = 0.0
        for j in range(n):
            ll += counts[j] * np.log((1.0 - lam) * theta[j] + lam * collprob[j])
        loglik[0] = ll
        z = np.empty(n)
        nxt = np.empty(n)
        for it in range(iters):
            s = 0.0
            for j in range(n):
                fg = (1.0 - lam) * theta[j]
                z[j] = counts[j] * (fg / (fg + lam * collprob[j]))
                s += z[j]
            ll = 0.0
            for j in range(n):
                nxt[j] = z[j] / s
                ll += counts[j] * np.log((1.0 - lam) * nxt[j] + lam * collprob[j])
            if ll < loglik[it]:
                for k in range(it + 1, iters + 1):
                    loglik[k] = loglik[it]
                break
            theta[:] = nxt
            loglik[it + 1] = ll
        return theta, loglik

else:  # pragma: no cover
    kl_accumulate_jit = kl_accumulate_np
    bm25_accumulate_jit = bm25_accumulate_np
    smm_em_jit = smm_em_np


if USING_NUMBA:
    kl_accumulate = kl_accumulate_jit
    bm25_accumulate = bm25_accumulate_jit
    smm_em = smm_em_jit
else:
    kl_accumulate = kl_accumulate_np
    bm25_accumulate = bm25_accumulate_np
    smm_em = smm_em_np
