"""Pure-NumPy fallback for the compiled rank-probability kernels.

Same contracts as covweight._kernels; used when the extension is not built.
Chunked over draws to bound memory.
"""

from __future__ import annotations

import numpy as np
from scipy import special, stats

_CHUNK = 256


def _finalize(acc, acc2, reps):
    mean = acc / reps
    var = np.maximum(acc2 / reps - mean * mean, 0.0)
    return mean, np.sqrt(var / reps)


def _binom_pmf_matrix(p, n):
    """(len(p), n+1) matrix of Binomial(n, p_r) pmfs."""
    p = np.asarray(p, dtype=float)
    if n == 0:
        return np.ones((p.size, 1))
    ks = np.arange(n + 1)
    out = stats.binom.pmf(ks[None, :], n, np.clip(p, 0.0, 1.0)[:, None])
    # exact endpoints: binom.pmf already handles p in {0,1}
    return out


def exact_rank_pmf(p0, p1, n0, n1, m):
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    reps = p0.size
    if n0 + n1 + 1 > m:
        raise ValueError("n0 + n1 + 1 exceeds the number of ranks m")
    acc = np.zeros(m)
    acc2 = np.zeros(m)
    for start in range(0, reps, _CHUNK):
        sl = slice(start, min(start + _CHUNK, reps))
        pmf0 = _binom_pmf_matrix(p0[sl], n0)
        pmf1 = _binom_pmf_matrix(p1[sl], n1)
        conv = np.zeros((pmf0.shape[0], m))
        for j in range(n0 + 1):
            conv[:, j : j + n1 + 1] += pmf0[:, j : j + 1] * pmf1
        acc += conv.sum(axis=0)
        acc2 += (conv * conv).sum(axis=0)
    return _finalize(acc, acc2, reps)


def normal_rank_pmf(p0, p1, n0, n1, m):
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    reps = p0.size
    acc = np.zeros(m)
    acc2 = np.zeros(m)
    edges = np.arange(m + 1) + 0.5  # cell k integrates (k-1/2, k+1/2]
    for start in range(0, reps, _CHUNK):
        sl = slice(start, min(start + _CHUNK, reps))
        mu = n0 * p0[sl] + n1 * p1[sl] + 1.0
        var = n0 * p0[sl] * (1.0 - p0[sl]) + n1 * p1[sl] * (1.0 - p1[sl])
        ok = var > 0.0
        if np.any(ok):
            sd = np.sqrt(var[ok])
            z = (edges[None, :] - mu[ok, None]) / sd[:, None]
            cdf = special.ndtr(z)
            # boundary cells absorb the out-of-range normal tails
            cdf[:, 0] = 0.0
            cdf[:, -1] = 1.0
            cells = np.diff(cdf, axis=1)
            acc += cells.sum(axis=0)
            acc2 += (cells * cells).sum(axis=0)
        if np.any(~ok):
            kdeg = np.clip(np.rint(mu[~ok]).astype(int), 1, m)
            np.add.at(acc, kdeg - 1, 1.0)
            np.add.at(acc2, kdeg - 1, 1.0)
    return _finalize(acc, acc2, reps)
