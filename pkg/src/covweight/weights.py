"""Shared weight-vector type and the Lagrange-multiplier solver.

Every weighting family reduces to

    w_i = prefactor * upper_tail(E/2 + (log(delta) + c_i) / E)

with a per-test offset c_i folding in the rank probability or density
terms, and delta >= 0 solved so the weights sum to their target.  The
solver is two-branch: Newton-Raphson after a
+-0.5 nudge of the starting point, then a grid search on (0, 1) step
0.001, re-gridded once to (0, 10] if the boundary wins.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .mathkernel import NonConvergenceError, SolverConfig, newton_raphson

__all__ = ["WeightVector", "normalize_weights"]

SUM_TOL = 1e-6  # |sum(w) - m| <= SUM_TOL * m for normalized vectors


@dataclass
class WeightVector:
    """Nonnegative per-test weights constrained to sum to m (mean 1)."""

    weights: np.ndarray
    delta: float | None
    normalized: bool
    fallback_uniform: bool = False
    diagnostics: dict = field(default_factory=dict)

    @property
    def m(self):
        return self.weights.size

    def validate(self):
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        if self.normalized:
            m = self.m
            if abs(self.weights.sum() - m) > SUM_TOL * m:
                raise ValueError("normalized weights must sum to m")
        return self


def normalize_weights(raw, delta, fallback=False, diagnostics=None):
    """Final normalization step: scale so the weights sum to m exactly."""
    raw = np.asarray(raw, dtype=float)
    m = raw.size
    total = raw.sum()
    if total <= 0 or not np.isfinite(total):
        return WeightVector(
            np.ones(m), delta, True, fallback_uniform=True,
            diagnostics={**(diagnostics or {}), "degenerate_sum": float(total)},
        )
    return WeightVector(
        raw * (m / total), delta, True,
        fallback_uniform=fallback, diagnostics=diagnostics or {},
    )


def _tail_args(delta, mean_effect, offsets):
    return 0.5 * mean_effect + (np.log(delta) + offsets) / mean_effect


def raw_weights_for_delta(delta, mean_effect, offsets, prefactor):
    """Un-normalized weights at a fixed multiplier."""
    return prefactor * special.ndtr(-_tail_args(delta, mean_effect, offsets))


def solve_delta_offsets(mean_effect, offsets, target, prefactor,
                        cfg: SolverConfig | None = None):
    """Multiplier delta_opt >= 0 minimizing |sum of weights - target|.

    The weight sum is monotone decreasing in delta.  Newton-Raphson runs
    first (after the +-0.5 start nudging loop, capped at 100 steps); any
    failure falls back to the grid on (0, 1) step 0.001, extended once
    geometrically to (0, 10] when the boundary point wins.
    """
    cfg = cfg or SolverConfig(
        max_iterations=100, abs_tolerance=max(1e-9 * target, 1e-12)
    )
    offsets = np.asarray(offsets, dtype=float)

    def weight_sum_gap(delta):
        if delta <= 0:
            return prefactor * offsets.size - target  # limit: every tail -> 1
        return raw_weights_for_delta(delta, mean_effect, offsets, prefactor).sum() - target

    def gap_prime(delta):
        if delta <= 0:
            return np.nan  # Newton treats this as a singular step and bails
        args = _tail_args(delta, mean_effect, offsets)
        dens = np.exp(-0.5 * args * args) / np.sqrt(2 * np.pi)
        return -prefactor * dens.sum() / (mean_effect * delta)

    # warm start: invert the formula at the mean offset (exact when the
    # offsets are constant, i.e. flat rank probabilities)
    n = offsets.size
    frac = min(max(target / (prefactor * n), 1e-300), 1.0 - 1e-16)
    z_star = -special.ndtri(frac)
    x0 = float(np.exp(mean_effect * (z_star - 0.5 * mean_effect)
                      - offsets.mean()))
    if not np.isfinite(x0) or x0 <= 0:
        x0 = 1.0

    nudges = 0
    while weight_sum_gap(x0) < 0 and nudges < 100:
        if x0 > 0.6:
            step = -0.5 if weight_sum_gap(x0) > weight_sum_gap(x0 + 0.5) else 0.5
            x0 += step
        else:
            x0 *= 0.5  # tiny-delta regime: the +-0.5 walk overshoots zero
        nudges += 1

    try:
        delta = newton_raphson(weight_sum_gap, gap_prime, x0, cfg)
        if delta > 0 and np.isfinite(delta):
            return float(delta)
    except NonConvergenceError:
        pass

    grid = np.arange(0.001, 1.0, 0.001)
    gaps = np.abs([weight_sum_gap(d) for d in grid])
    best = int(np.argmin(gaps))
    if best in (0, grid.size - 1):
        grid = np.geomspace(1e-6, 10.0, 2000)
        gaps = np.abs([weight_sum_gap(d) for d in grid])
        best = int(np.argmin(gaps))
    winner = float(grid[best])
    try:
        # polish: Newton restarted from the grid winner
        delta = newton_raphson(weight_sum_gap, gap_prime, winner, cfg)
        if delta > 0 and np.isfinite(delta):
            return float(delta)
    except NonConvergenceError:
        pass
    return winner
