"""Effect-size priors and tail probabilities of the test statistics.

Statistics are unit-variance normal around their effect.  Under the null
the exceedance is P(X > t) = Phi(-t); under an alternative with a random
effect it is P(Y > t) averaged over the prior, with closed forms for the
point-mass, uniform, exponential and normal priors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .mathkernel import norm_pdf, norm_sf

__all__ = [
    "EffectPrior",
    "PointMass",
    "Uniform",
    "Exponential",
    "NormalPrior",
    "TestPopulation",
    "null_exceedance",
    "alt_exceedance",
    "prior_mean",
]


class EffectPrior:
    """Distribution of alternative effect sizes."""

    def exceedance(self, t):
        """P(Y > t) for Y ~ N(effect, 1) with effect drawn from this prior."""
        raise NotImplementedError

    def mean(self):
        raise NotImplementedError

    def sample(self, rng, size):
        raise NotImplementedError

    def quadrature(self, nodes):
        """(points, weights) discretizing the prior for numeric integration."""
        raise NotImplementedError


@dataclass(frozen=True)
class PointMass(EffectPrior):
    effect: float

    def __post_init__(self):
        if not np.isfinite(self.effect):
            raise ValueError("point-mass effect must be finite")

    def exceedance(self, t):
        return norm_sf(np.asarray(t, dtype=float) - self.effect)

    def mean(self):
        return self.effect

    def sample(self, rng, size):
        return np.full(size, self.effect)

    def quadrature(self, nodes):
        return np.array([self.effect]), np.array([1.0])


@dataclass(frozen=True)
class Uniform(EffectPrior):
    low: float
    high: float

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError("uniform prior requires low < high")

    def exceedance(self, t):
        t = np.asarray(t, dtype=float)
        a, b = self.low, self.high
        val = (
            (b - t) * special.ndtr(b - t)
            - (a - t) * special.ndtr(a - t)
            + norm_pdf(b - t)
            - norm_pdf(a - t)
        ) / (b - a)
        out = np.clip(val, 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def mean(self):
        return 0.5 * (self.low + self.high)

    def sample(self, rng, size):
        return rng.uniform(self.low, self.high, size)

    def quadrature(self, nodes):
        pts, wts = np.polynomial.legendre.leggauss(nodes)
        half = 0.5 * (self.high - self.low)
        return self.low + half * (pts + 1.0), wts * 0.5


@dataclass(frozen=True)
class Exponential(EffectPrior):
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("exponential prior requires rate > 0")

    def exceedance(self, t):
        t = np.asarray(t, dtype=float)
        lam = self.rate
        # exp(lam^2/2 - lam t) * Phi(t - lam), evaluated in log space to
        # survive large lam*t
        tail = np.exp(0.5 * lam * lam - lam * t + special.log_ndtr(t - lam))
        out = np.clip(special.ndtr(-t) + tail, 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def mean(self):
        return 1.0 / self.rate

    def sample(self, rng, size):
        return rng.exponential(1.0 / self.rate, size)

    def quadrature(self, nodes):
        pts, wts = np.polynomial.laguerre.laggauss(nodes)
        return pts / self.rate, wts


@dataclass(frozen=True)
class NormalPrior(EffectPrior):
    mean_effect: float
    sd: float

    def __post_init__(self):
        if not self.sd > 0:
            raise ValueError("normal prior requires sd > 0")

    def exceedance(self, t):
        t = np.asarray(t, dtype=float)
        scale = np.sqrt(self.sd**2 + 1.0)
        out = special.ndtr((self.mean_effect - t) / scale)
        return float(out) if out.ndim == 0 else out

    def mean(self):
        return self.mean_effect

    def sample(self, rng, size):
        return rng.normal(self.mean_effect, self.sd, size)

    def quadrature(self, nodes):
        pts, wts = np.polynomial.hermite_e.hermegauss(nodes)
        return self.mean_effect + self.sd * pts, wts / wts.sum()


@dataclass(frozen=True)
class TestPopulation:
    """Composition of one set of m tests: m0 true nulls, m1 alternatives."""

    __test__ = False  # keep pytest from collecting this as a test class

    m: int
    m0: int
    m1: int
    alt_prior: EffectPrior | None = None

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.m0 < 0 or self.m1 < 0 or self.m0 + self.m1 != self.m:
            raise ValueError("m0 + m1 must equal m with both nonnegative")
        if self.m1 > 0 and self.alt_prior is None:
            raise ValueError("populations with alternatives need an alt_prior")


def null_exceedance(t):
    """P(X > t) under the null model: Phi(-t)."""
    return norm_sf(t)


def alt_exceedance(prior: EffectPrior, t):
    """P(Y > t) under the alternative model, averaged over the effect prior."""
    if not isinstance(prior, EffectPrior):
        raise ValueError("prior must be an EffectPrior")
    return prior.exceedance(t)


def prior_mean(prior: EffectPrior):
    """Exact analytic mean of the prior."""
    return float(prior.mean())
