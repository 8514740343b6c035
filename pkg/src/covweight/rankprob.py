"""Probability that a test lands at covariate rank k given its effect size.

A focal statistic t ~ N(effect, 1) competes with m0 nulls and m1
alternatives; its rank counts the competitors exceeding t plus one
(rank 1 = largest).  Conditional on t the rank minus one is the sum of two
binomials with success probabilities P(X > t) and P(Y > t); the
unconditional rank pmf is the expectation over t, estimated here by
importance sampling with the focal test's own density as the proposal
(which cancels the density ratio to a plain average).

Three estimators: the exact binomial-convolution Monte Carlo, the normal
approximation of the convolution, and a brute-force population sampler
used as the oracle for the first two.  An all-null population has exactly
uniform ranks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .effects import EffectPrior, TestPopulation, null_exceedance
from .mathkernel import fit_smoothing_spline

__all__ = [
    "McConfig",
    "RankDistribution",
    "rank_prob_exact_mc",
    "rank_prob_normal_approx",
    "rank_prob_all_null",
    "rank_prob_bruteforce",
    "smooth_rank_probs",
]

# beyond this many tests the exact convolution gains nothing over the
# normal approximation and costs O(m0*m1) per draw
EXACT_CONV_MAX_M = 500


@dataclass(frozen=True)
class McConfig:
    """Importance-sampling resolution for the rank-probability integrals."""

    replications: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")


@dataclass
class RankDistribution:
    """P(rank = k) for k = 1..m, plus Monte-Carlo standard errors."""

    probabilities: np.ndarray
    std_errors: np.ndarray | None
    effect: float
    population: TestPopulation
    method: str = "exact-mc"
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        total = float(self.probabilities.sum())
        if total > 0 and abs(total - 1.0) > 1e-12:
            self.probabilities = self.probabilities / total
        self.diagnostics.setdefault("raw_total", total)

    @property
    def ranks(self):
        return np.arange(1, self.probabilities.size + 1)


def _trial_counts(pop: TestPopulation, is_null_focal: bool):
    if is_null_focal:
        if pop.m0 < 1:
            raise ValueError("a null focal test requires m0 >= 1")
        return pop.m0 - 1, pop.m1
    if pop.m1 < 1:
        raise ValueError("an alternative focal test requires m1 >= 1")
    return pop.m0, pop.m1 - 1


def _draw_exceedances(pop, focal_effect, is_null_focal, mc, t_draws=None):
    if is_null_focal and focal_effect != 0.0:
        raise ValueError("a null focal test has effect 0")
    if t_draws is None:
        rng = np.random.Generator(np.random.Philox(mc.seed))
        t_draws = focal_effect + rng.standard_normal(mc.replications)
    p0 = np.asarray(null_exceedance(t_draws), dtype=float)
    if pop.m1 - (0 if is_null_focal else 1) > 0:
        p1 = np.asarray(pop.alt_prior.exceedance(t_draws), dtype=float)
    else:
        p1 = np.zeros_like(p0)
    return p0, p1


def rank_prob_exact_mc(
    pop: TestPopulation,
    focal_effect: float,
    is_null_focal: bool,
    mc: McConfig | None = None,
    t_draws=None,
):
    """Exact two-binomial convolution averaged over Monte-Carlo draws of t.

    Populations with m > EXACT_CONV_MAX_M dispatch to the normal
    approximation of the inner convolution.
    """
    mc = mc or McConfig()
    if pop.m > EXACT_CONV_MAX_M:
        return rank_prob_normal_approx(pop, focal_effect, is_null_focal, mc, t_draws)
    n0, n1 = _trial_counts(pop, is_null_focal)
    p0, p1 = _draw_exceedances(pop, focal_effect, is_null_focal, mc, t_draws)
    probs, se = kernels.exact_rank_pmf(p0, p1, n0, n1, pop.m)
    return RankDistribution(probs, se, focal_effect, pop, method="exact-mc")


def rank_prob_normal_approx(
    pop: TestPopulation,
    focal_effect: float,
    is_null_focal: bool,
    mc: McConfig | None = None,
    t_draws=None,
):
    """Normal approximation of the binomial convolution, averaged over t."""
    mc = mc or McConfig()
    n0, n1 = _trial_counts(pop, is_null_focal)
    p0, p1 = _draw_exceedances(pop, focal_effect, is_null_focal, mc, t_draws)
    probs, se = kernels.normal_rank_pmf(p0, p1, n0, n1, pop.m)
    return RankDistribution(probs, se, focal_effect, pop, method="normal-approx")


def rank_prob_all_null(m: int):
    """Exactly uniform ranks when every test is a true null."""
    if m < 1:
        raise ValueError("m must be >= 1")
    pop = TestPopulation(m=m, m0=m, m1=0)
    probs = np.full(m, 1.0 / m)
    return RankDistribution(probs, np.zeros(m), 0.0, pop, method="all-null")


def rank_prob_bruteforce(
    pop: TestPopulation,
    focal_effect: float,
    is_null_focal: bool,
    samples: int,
    seed: int = 0,
):
    """Simulate whole populations and tabulate the focal test's rank.

    The oracle for the two estimators above: draws `samples` populations of
    m statistics (alternative effects redrawn from the prior each sample),
    records the focal rank, and returns relative frequencies.
    """
    if is_null_focal and focal_effect != 0.0:
        raise ValueError("a null focal test has effect 0")
    n0, n1 = _trial_counts(pop, is_null_focal)
    rng = np.random.Generator(np.random.Philox(seed))
    counts = np.zeros(pop.m, dtype=np.int64)
    chunk = max(1, min(samples, int(4e6 // max(pop.m, 1))))
    done = 0
    while done < samples:
        size = min(chunk, samples - done)
        focal = focal_effect + rng.standard_normal(size)
        exceed = np.zeros(size, dtype=np.int64)
        if n0 > 0:
            nulls = rng.standard_normal((size, n0))
            exceed += (nulls > focal[:, None]).sum(axis=1)
        if n1 > 0:
            effs = pop.alt_prior.sample(rng, (size, n1))
            alts = effs + rng.standard_normal((size, n1))
            exceed += (alts > focal[:, None]).sum(axis=1)
        np.add.at(counts, exceed, 1)  # rank = exceed + 1 -> index exceed
        done += size
    probs = counts / samples
    se = np.sqrt(probs * (1.0 - probs) / samples)
    return RankDistribution(probs, se, focal_effect, pop, method="bruteforce")


def smooth_rank_probs(dist: RankDistribution, df: float):
    """Optional spline smoothing of a rank-probability curve.

    Fits the curve over the rank index at the given effective df, floors at
    zero and renormalizes; raw output elsewhere stays the default.
    """
    probs = dist.probabilities
    if probs.size < 4:
        raise ValueError("need at least four ranks to smooth")
    fit = fit_smoothing_spline(dist.ranks.astype(float), probs, df)
    smoothed = np.maximum(fit.values, 1e-300)
    smoothed = smoothed / smoothed.sum()
    return RankDistribution(
        smoothed,
        dist.std_errors,
        dist.effect,
        dist.population,
        method=dist.method + "+spline",
        diagnostics={"smooth_df": df},
    )
