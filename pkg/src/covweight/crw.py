"""Covariate rank weights.

The approximate continuous-effect weight

    w_i = (m/alpha) * P(Z > E/2 + log(delta / (alpha * P(r_i | E))) / E)

its binary-effect counterpart (an extra m/(m1 * P) inside the log), the
exact-integral weights obtained by solving the first-order condition

    integral exp(u * eps - eps^2/2) P(r_i | eps) f(eps) d(eps) = delta/alpha

for u = upper-tail quantile of (alpha w / m), and the shared Lagrange
multiplier solve.  Two-tailed testing replaces m by 2m in the prefactor
and inside the critical-value quantile.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .effects import TestPopulation
from .mathkernel import SolverConfig, brent_root
from .rankprob import RankDistribution
from .weights import (
    WeightVector,
    normalize_weights,
    raw_weights_for_delta,
    solve_delta_offsets,
)

__all__ = [
    "CrwInputs",
    "crw_weights_continuous",
    "crw_weights_binary",
    "solve_delta",
    "crw_weights_exact",
]

# rank probabilities of exactly zero blow up the log term; floor them
PROB_FLOOR_SCALE = 1e-6


@dataclass
class CrwInputs:
    """Inputs shared by the continuous and binary weight formulas."""

    rank_probs: np.ndarray  # P(r_i | mean covariate effect), length m
    mean_test_effect: float
    alpha: float
    m: int
    m1: int | None = None  # binary case only
    tails: int = 1

    def __post_init__(self):
        if isinstance(self.rank_probs, RankDistribution):  # convenience
            self.rank_probs = self.rank_probs.probabilities
        self.rank_probs = np.asarray(self.rank_probs, dtype=float)
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must be in (0, 1)")
        if self.m < 1 or self.rank_probs.size != self.m:
            raise ValueError("rank_probs must have length m >= 1")
        if self.tails not in (1, 2):
            raise ValueError("tails must be 1 or 2")

    def floored_probs(self):
        return np.maximum(self.rank_probs, PROB_FLOOR_SCALE / self.m)


def _prefactor(inputs: CrwInputs):
    mult = 2.0 if inputs.tails == 2 else 1.0
    return mult * inputs.m / inputs.alpha


def _uniform_fallback(inputs, reason):
    return WeightVector(
        np.ones(inputs.m), None, True, fallback_uniform=True,
        diagnostics={"fallback_reason": reason},
    )


def solve_delta(inputs: CrwInputs, weight_formula: str = "continuous"):
    """Multiplier delta_opt with |sum w(delta_opt) - m| minimized."""
    offsets = _offsets(inputs, weight_formula)
    return solve_delta_offsets(
        inputs.mean_test_effect, offsets, inputs.m, _prefactor(inputs)
    )


def _offsets(inputs: CrwInputs, weight_formula: str):
    probs = inputs.floored_probs()
    if weight_formula == "continuous":
        return -np.log(inputs.alpha * probs)
    if weight_formula == "binary":
        if inputs.m1 is None or inputs.m1 < 1:
            raise ValueError("binary weights need m1 >= 1")
        return np.log(inputs.m / (inputs.alpha * inputs.m1 * probs))
    raise ValueError(f"unknown weight formula {weight_formula!r}")


def _weights(inputs: CrwInputs, weight_formula: str):
    if inputs.mean_test_effect <= 0:
        return _uniform_fallback(inputs, "mean test effect <= 0")
    offsets = _offsets(inputs, weight_formula)
    delta = solve_delta_offsets(
        inputs.mean_test_effect, offsets, inputs.m, _prefactor(inputs)
    )
    raw = raw_weights_for_delta(
        delta, inputs.mean_test_effect, offsets, _prefactor(inputs)
    )
    return normalize_weights(raw, delta)


def crw_weights_continuous(inputs: CrwInputs) -> WeightVector:
    """Approximate weights at the mean alternative effect, summing to m."""
    return _weights(inputs, "continuous")


def crw_weights_binary(inputs: CrwInputs) -> WeightVector:
    """Binary-effect weights: common effect, m1 alternatives."""
    return _weights(inputs, "binary")


# ---------------------------------------------------------------------------
# Exact weights: per-test root solve of the first-order condition nested in
# the multiplier constraint.  Everything runs in log space; the per-test
# solve is a vectorized bisection in u (the integrand is increasing in u
# because effects are positive).
# ---------------------------------------------------------------------------


def _log_integral(u, eps, log_wq, log_probs):
    """log of integral exp(u*eps - eps^2/2) P(r|eps) f(eps) deps per test.

    u: (m,) column of candidate quantiles; eps: (q,) quadrature nodes;
    log_probs: (q, m) log rank probabilities per node.
    """
    terms = log_wq[:, None] + np.outer(eps, np.ones(u.size)) * u[None, :]
    terms += (-0.5 * eps * eps)[:, None] + log_probs
    # logsumexp over nodes, guarding all -inf columns
    top = terms.max(axis=0)
    safe = np.isfinite(top)
    out = np.full(u.size, -np.inf)
    if np.any(safe):
        out[safe] = top[safe] + np.log(
            np.exp(terms[:, safe] - top[safe][None, :]).sum(axis=0)
        )
    return out


def crw_weights_exact(
    pop: TestPopulation,
    rank_probs_by_effect,
    alpha: float,
    m: int,
    quadrature_nodes: int = 16,
) -> WeightVector:
    """Exact-integral weights; the oracle the Taylor approximation is checked
    against.

    `rank_probs_by_effect` maps a positive point effect to the
    RankDistribution of an alternative focal test at that effect.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    if pop.alt_prior is None:
        raise ValueError("exact weights need the population's effect prior")
    eps, wq = pop.alt_prior.quadrature(quadrature_nodes)
    keep = eps > 0  # the optimality condition integrates over eps > 0 only
    eps, wq = eps[keep], wq[keep]
    if eps.size == 0:
        raise ValueError("effect prior has no mass on positive effects")
    log_wq = np.log(wq)

    floor = PROB_FLOOR_SCALE / m
    log_probs = np.empty((eps.size, m))
    for qi, e in enumerate(eps):
        dist = rank_probs_by_effect(float(e))
        probs = dist.probabilities if isinstance(dist, RankDistribution) else np.asarray(dist)
        log_probs[qi] = np.log(np.maximum(probs, floor))

    u_lo_base, u_hi_base = -12.0, 12.0

    def weights_at(log_target):
        lo = np.full(m, u_lo_base)
        hi = np.full(m, u_hi_base)
        # expand until the targets are bracketed for every test
        for _ in range(60):
            vals = _log_integral(hi, eps, log_wq, log_probs)
            if np.all(vals >= log_target):
                break
            hi[vals < log_target] += 6.0
        for _ in range(60):
            vals = _log_integral(lo, eps, log_wq, log_probs)
            if np.all(vals <= log_target):
                break
            lo[vals > log_target] -= 6.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            vals = _log_integral(mid, eps, log_wq, log_probs)
            high = vals > log_target
            hi[high] = mid[high]
            lo[~high] = mid[~high]
        u = 0.5 * (lo + hi)
        return (m / alpha) * special.ndtr(-u)

    def gap(log_delta):
        return weights_at(log_delta - np.log(alpha)).sum() - m

    # sum of weights is decreasing in delta: bracket in log delta
    lo, hi = -5.0, 5.0
    for _ in range(60):
        if gap(lo) > 0:
            break
        lo -= 5.0
    for _ in range(60):
        if gap(hi) < 0:
            break
        hi += 5.0
    if gap(lo) < 0 or gap(hi) > 0:
        err = RuntimeError("exact weight multiplier failed to bracket")
        err.partial_weights = weights_at(0.0 - np.log(alpha))
        raise err
    log_delta = brent_root(gap, lo, hi, SolverConfig(abs_tolerance=1e-6 * m))
    raw = weights_at(log_delta - np.log(alpha))
    return normalize_weights(raw, float(np.exp(log_delta)))
