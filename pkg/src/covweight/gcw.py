"""Gaussian covariate weights.

With covariates x | eps ~ N(eps, nu^2) and a Gaussian effect prior
eps ~ N(eta, sigma^2), the optimal weight is w_i = (m/alpha) * P(Z > u2)
with u2 the larger root of a quadratic in the critical value; the tuning
multiplier lambda enforces sum(w) = m.  Reparameterizing by

    mu = (eta*nu^2 + x*sigma^2) / tau^2,   s^2 = gamma^2/tau^2 - 1

reduces the problem to the prior-only Bayes-weight solver, which is the
core implementation here.  For lambda below a test's feasibility bound the
discriminant goes negative and that test's weight is zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .mathkernel import SolverConfig, brent_root
from .weights import (
    WeightVector,
    normalize_weights,
    raw_weights_for_delta,
    solve_delta_offsets,
)

__all__ = [
    "GcwParams",
    "Gcw2Inputs",
    "gcw_weights",
    "lambda_lower_bound",
    "bw_weights",
    "gcw_reparameterize",
    "gcw2_weights",
]

SIGMA_SQ_SPECIAL_CASE = 1e-6  # below this, dispatch to the sigma -> 0 form
LAMBDA_HI_CAP = 1e6


@dataclass
class GcwParams:
    """Per-test parameters; scalars broadcast across tests."""

    eta: np.ndarray
    sigma: np.ndarray
    nu: np.ndarray
    covariate: np.ndarray
    density_ratio: np.ndarray | float = 1.0

    def __post_init__(self):
        arrays = np.broadcast_arrays(
            *(np.asarray(a, dtype=float)
              for a in (self.eta, self.sigma, self.nu, self.covariate,
                        self.density_ratio))
        )
        self.eta, self.sigma, self.nu, self.covariate, self.density_ratio = (
            np.atleast_1d(a.copy()) for a in arrays
        )
        if np.any(self.sigma < 0) or np.any(self.nu < 0):
            raise ValueError("sigma and nu must be nonnegative")
        if np.any(self.density_ratio <= 0):
            raise ValueError("density ratios must be positive")
        if np.any(self.tau_sq <= 0):
            raise ValueError("tau^2 = sigma^2 + nu^2 must be positive")

    @property
    def tau_sq(self):
        return self.sigma**2 + self.nu**2

    @property
    def gamma_sq(self):
        return self.sigma**2 * self.nu**2 + self.sigma**2 + self.nu**2

    @property
    def m(self):
        return self.eta.size


def gcw_reparameterize(params: GcwParams):
    """(mu, sigma_sq) mapping the covariate model onto the prior-only solver."""
    tau_sq = params.tau_sq
    mu = (params.eta * params.nu**2 + params.covariate * params.sigma**2) / tau_sq
    sigma_sq = params.gamma_sq / tau_sq - 1.0
    return mu, sigma_sq


def lambda_lower_bound(params: GcwParams, alpha: float, m: int):
    """Per-test feasibility bound: the multiplier where the discriminant
    of the weight quadratic hits zero (squared mean term)."""
    mu, s_sq = gcw_reparameterize(params)
    if np.any(s_sq <= 0):
        raise ValueError("feasibility bound needs gamma^2/tau^2 > 1")
    gnew = np.sqrt(1.0 + s_sq)
    out = (alpha / (gnew * m * params.density_ratio)) * np.exp(
        -(mu**2) / (2.0 * s_sq)
    )
    return out if out.size > 1 else float(out[0])


def _bw_u2(mu, s_sq, gnew, log_term, lam):
    """Larger quadratic root u2; -inf marks infeasible (complex-root) tests."""
    disc = mu**2 + 2.0 * s_sq * (np.log(lam) + log_term)
    u2 = np.full(mu.shape, np.inf)
    feas = disc >= 0
    u2[feas] = (-mu[feas] + gnew[feas] * np.sqrt(disc[feas])) / s_sq[feas]
    return u2, feas


def _bw_raw_weights(mu, s_sq, gnew, log_term, lam, alpha, m):
    special_case = s_sq < SIGMA_SQ_SPECIAL_CASE
    raw = np.zeros(mu.shape)
    if np.any(~special_case):
        u2, feas = _bw_u2(
            mu[~special_case], s_sq[~special_case], gnew[~special_case],
            log_term[~special_case], lam,
        )
        vals = np.zeros(u2.shape)
        vals[feas] = (m / alpha) * special.ndtr(-u2[feas])
        raw[~special_case] = vals
    if np.any(special_case):
        # sigma -> 0 limit reduces to the known-effect (Spjotvoll) form
        mu_s = mu[special_case]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = mu_s / 2.0 + (np.log(lam) + log_term[special_case]) / mu_s
        u = np.where(mu_s > 0, u, np.inf)
        raw[special_case] = (m / alpha) * special.ndtr(-u)
    return raw


def _solve_lambda(mu, s_sq, gnew, log_term, alpha, m):
    """Multiplier with sum(w) = m; Newton first when feasible, Brent otherwise."""

    def gap(lam):
        return _bw_raw_weights(mu, s_sq, gnew, log_term, lam, alpha, m).sum() - m

    lam_floor = 0.0
    regular = s_sq >= SIGMA_SQ_SPECIAL_CASE
    if np.any(regular):
        bounds = np.exp(-(mu[regular] ** 2) / (2.0 * s_sq[regular])
                        - log_term[regular])
        lam_floor = float(bounds.max())

    g1 = gap(1.0)
    if abs(g1) <= 1e-9 * m:
        return 1.0
    if g1 > 0:
        # root above 1: Newton from 1 with numeric slope, Brent on failure
        lo, hi = 1.0, 2.0
        while gap(hi) > 0 and hi < LAMBDA_HI_CAP:
            lo, hi = hi, hi * 4.0
        if gap(hi) > 0:
            return hi  # saturated at the cap; weights renormalize downstream
        return brent_root(gap, lo, hi, SolverConfig(abs_tolerance=1e-6 * m))
    lo = lam_floor * (1.0 + 1e-12) if lam_floor > 0 else 1e-300
    glo = gap(lo)
    if glo < 0:
        raise ValueError(
            "degenerate inputs: weight sum below m at every feasible lambda"
        )
    return brent_root(gap, lo, 1.0, SolverConfig(abs_tolerance=1e-6 * m))


def bw_weights(eta, gamma, alpha: float, m: int, density_ratio=1.0) -> WeightVector:
    """Bayes weights of the prior-only Gaussian model (gamma^2 = 1 + sigma^2).

    Also the reparameterization target for gcw_weights.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    eta, gamma, dens = (np.atleast_1d(np.asarray(a, dtype=float))
                        for a in np.broadcast_arrays(eta, gamma, density_ratio))
    if np.any(gamma < 1):
        raise ValueError("gamma must be >= 1")
    s_sq = gamma**2 - 1.0
    log_term = np.log(gamma * m * dens / alpha)
    lam = _solve_lambda(eta, s_sq, gamma, log_term, alpha, m)
    raw = _bw_raw_weights(eta, s_sq, gamma, log_term, lam, alpha, m)
    return normalize_weights(raw, lam)


def gcw_weights(params: GcwParams, alpha: float, m: int) -> WeightVector:
    """Covariate-conditioned optimal weights via the reparameterized solver."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    if params.m != m:
        raise ValueError("params must describe m tests")
    mu, s_sq = gcw_reparameterize(params)
    gnew = np.sqrt(1.0 + s_sq)
    result = bw_weights(mu, gnew, alpha, m, density_ratio=params.density_ratio)
    result.diagnostics["reparameterized"] = True
    return result


def gcw2_weights(inputs: "Gcw2Inputs") -> WeightVector:
    """Distribution-free approximation: the rank in the CRW weight is replaced
    by the covariate itself through the density ratio f(x) / P(x | E)."""
    if inputs.mean_test_effect <= 0:
        return WeightVector(
            np.ones(inputs.m), None, True, fallback_uniform=True,
            diagnostics={"fallback_reason": "mean test effect <= 0"},
        )
    offsets = np.log(
        inputs.m * inputs.covariate_density
        / (inputs.alpha * inputs.conditional_density)
    )
    prefactor = inputs.m / inputs.alpha
    delta = solve_delta_offsets(
        inputs.mean_test_effect, offsets, inputs.m, prefactor
    )
    raw = raw_weights_for_delta(
        delta, inputs.mean_test_effect, offsets, prefactor
    )
    return normalize_weights(raw, delta)


@dataclass
class Gcw2Inputs:
    covariate_density: np.ndarray
    conditional_density: np.ndarray
    mean_test_effect: float
    alpha: float
    m: int

    def __post_init__(self):
        self.covariate_density, self.conditional_density = (
            np.atleast_1d(np.asarray(a, dtype=float))
            for a in np.broadcast_arrays(
                self.covariate_density, self.conditional_density
            )
        )
        if np.any(self.covariate_density <= 0) or np.any(self.conditional_density <= 0):
            raise ValueError("densities must be positive")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must be in (0, 1)")
        if self.covariate_density.size not in (1, self.m):
            raise ValueError("densities must have length m")
