# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled accumulation kernels for the rank-probability estimators.

Each kernel consumes per-draw success probabilities (null and alternative
exceedances at the sampled statistic) and accumulates the rank pmf across
draws, returning the Monte-Carlo mean and its standard error per rank.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport erfc, exp, lgamma, log, log1p, sqrt

cnp.import_array()


cdef double SQRT1_2 = 0.7071067811865476


cdef inline double _phi_cdf(double x) noexcept nogil:
    return 0.5 * erfc(-x * SQRT1_2)


cdef void _binom_pmf(double p, int n, double* out) noexcept nogil:
    """pmf of Binomial(n, p) into out[0..n], via log-gamma for stability."""
    cdef int j
    cdef double lp, lq, lgn
    if n == 0:
        out[0] = 1.0
        return
    if p <= 0.0:
        for j in range(n + 1):
            out[j] = 0.0
        out[0] = 1.0
        return
    if p >= 1.0:
        for j in range(n + 1):
            out[j] = 0.0
        out[n] = 1.0
        return
    lp = log(p)
    lq = log1p(-p)
    lgn = lgamma(n + 1.0)
    for j in range(n + 1):
        out[j] = exp(lgn - lgamma(j + 1.0) - lgamma(n - j + 1.0)
                     + j * lp + (n - j) * lq)


def exact_rank_pmf(double[::1] p0, double[::1] p1, int n0, int n1, int m):
    """Average over draws of the exact two-binomial-convolution rank pmf.

    Rank k (1-based) receives P(X + Y = k - 1) with X ~ Binom(n1, p1[r]) and
    Y ~ Binom(n0, p0[r]) for each draw r.  Returns (mean, stderr), each of
    length m.
    """
    cdef Py_ssize_t reps = p0.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] acc = np.zeros(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] acc2 = np.zeros(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] pmf0 = np.zeros(n0 + 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] pmf1 = np.zeros(n1 + 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cell = np.zeros(m)
    cdef double[::1] a = acc, a2 = acc2, b0 = pmf0, b1 = pmf1, c = cell
    cdef Py_ssize_t r
    cdef int j, z, k
    cdef double v

    if n0 + n1 + 1 > m:
        raise ValueError("n0 + n1 + 1 exceeds the number of ranks m")

    with nogil:
        for r in range(reps):
            _binom_pmf(p0[r], n0, &b0[0])
            _binom_pmf(p1[r], n1, &b1[0])
            for k in range(m):
                c[k] = 0.0
            for j in range(n0 + 1):
                v = b0[j]
                if v == 0.0:
                    continue
                for z in range(n1 + 1):
                    c[j + z] += v * b1[z]
            for k in range(m):
                a[k] += c[k]
                a2[k] += c[k] * c[k]

    return _finalize(acc, acc2, reps)


def normal_rank_pmf(double[::1] p0, double[::1] p1, int n0, int n1, int m):
    """Average over draws of the continuity-corrected normal rank pmf.

    Per draw the convolution is approximated by N(mu, sigma^2) with
    mu = n0*p0 + n1*p1 + 1 and sigma^2 = n0*p0*(1-p0) + n1*p1*(1-p1);
    cell k integrates the density over [k-1/2, k+1/2].  Degenerate draws
    (sigma = 0) contribute a point mass at the rounded mean.
    """
    cdef Py_ssize_t reps = p0.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] acc = np.zeros(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] acc2 = np.zeros(m)
    cdef double[::1] a = acc, a2 = acc2
    cdef Py_ssize_t r
    cdef int k, klo, khi, kdeg
    cdef double mu, var, sd, lo_cdf, hi_cdf, cellv

    with nogil:
        for r in range(reps):
            mu = n0 * p0[r] + n1 * p1[r] + 1.0
            var = n0 * p0[r] * (1.0 - p0[r]) + n1 * p1[r] * (1.0 - p1[r])
            if var <= 0.0:
                kdeg = <int> (mu + 0.5)
                if kdeg < 1:
                    kdeg = 1
                if kdeg > m:
                    kdeg = m
                a[kdeg - 1] += 1.0
                a2[kdeg - 1] += 1.0
                continue
            sd = sqrt(var)
            # only ranks within 9 sd of the mean carry mass
            klo = <int> (mu - 9.0 * sd)
            if klo < 1:
                klo = 1
            khi = <int> (mu + 9.0 * sd + 1.0)
            if khi > m:
                khi = m
            # boundary cells absorb the out-of-range normal tails
            if klo == 1:
                lo_cdf = 0.0
            else:
                lo_cdf = _phi_cdf((klo - 0.5 - mu) / sd)
            for k in range(klo, khi + 1):
                if k == m:
                    hi_cdf = 1.0
                else:
                    hi_cdf = _phi_cdf((k + 0.5 - mu) / sd)
                cellv = hi_cdf - lo_cdf
                a[k - 1] += cellv
                a2[k - 1] += cellv * cellv
                lo_cdf = hi_cdf

    return _finalize(acc, acc2, reps)


def _finalize(acc, acc2, Py_ssize_t reps):
    mean = acc / reps
    var = np.maximum(acc2 / reps - mean * mean, 0.0)
    return mean, np.sqrt(var / reps)
