"""Desk-scale validation suite behind the `validate` CLI command.

Reduced-scale versions of the acceptance checks (the full-scale versions
live in the test suite): each check returns (name, passed, detail) and the
report is deterministic for a fixed seed.
"""

from __future__ import annotations

import time

import numpy as np

from . import crw, gcw
from .effects import PointMass, TestPopulation, Uniform
from .mathkernel import norm_sf
from .pipeline import (
    AnalysisOptions,
    TestCollection,
    run_analysis,
    weighted_bh,
    weighted_bonferroni,
)
from .rankprob import McConfig, rank_prob_bruteforce, rank_prob_exact_mc, rank_prob_normal_approx
from .simulate import SimScenario, simulate_metrics
from .weights import WeightVector


def _check_uniform_ranks(seed, norm_cdf_impl=None):
    m = 100
    pop = TestPopulation(m, m, 0)
    dist = rank_prob_exact_mc(pop, 0.0, True, McConfig(20_000, seed))
    probs = dist.probabilities
    if norm_cdf_impl is not None:  # corruption hook for self-testing
        probs = probs + (norm_cdf_impl(0.0) - 0.5)
    dev = np.abs(probs - 1.0 / m)
    limit = 3.0 * np.maximum(dist.std_errors, 1e-12)
    ok = bool(np.all(dev <= limit))
    return ok, f"max|p-1/m|={dev.max():.2e} vs 3*SE={limit.max():.2e}"


def _check_approx_vs_bruteforce(seed, **_):
    pop = TestPopulation(100, 50, 50, Uniform(0, 1))
    approx = rank_prob_normal_approx(pop, 1.0, False, McConfig(20_000, seed))
    brute = rank_prob_bruteforce(pop, 1.0, False, 100_000, seed + 1)
    dev = np.abs(approx.probabilities - brute.probabilities).max()
    return bool(dev <= 0.02), f"max abs dev={dev:.4f} (limit 0.02)"


def _check_weight_constraint(seed, **_):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(40):
        m = int(rng.integers(5, 120))
        probs = rng.dirichlet(np.ones(m))
        effect = float(rng.uniform(0.5, 4.0))
        alpha = float(rng.uniform(0.01, 0.2))
        m1 = int(rng.integers(1, m + 1))
        inputs = crw.CrwInputs(rank_probs=probs, mean_test_effect=effect,
                               alpha=alpha, m=m, m1=m1)
        for wv in (crw.crw_weights_continuous(inputs), crw.crw_weights_binary(inputs)):
            worst = max(worst, abs(wv.weights.sum() - m) / m)
            if wv.weights.min() < 0:
                return False, "negative weight"
    return bool(worst <= 1e-6), f"worst |sum-m|/m={worst:.2e}"


def _check_gcw_bw_equivalence(seed, **_):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        m = int(rng.integers(5, 60))
        params = gcw.GcwParams(
            eta=rng.normal(1.5, 0.5, m), sigma=rng.uniform(0.2, 1.0, m),
            nu=rng.uniform(0.3, 1.2, m), covariate=rng.normal(1.0, 1.5, m),
        )
        wg = gcw.gcw_weights(params, 0.05, m)
        mu, s_sq = gcw.gcw_reparameterize(params)
        wb = gcw.bw_weights(mu, np.sqrt(1.0 + s_sq), 0.05, m)
        worst = max(worst, float(np.abs(wg.weights - wb.weights).max()))
    return bool(worst <= 1e-6), f"worst |gcw-bw|={worst:.2e}"


def _check_weighted_identities(seed, **_):
    rng = np.random.default_rng(seed)
    for _ in range(100):
        m = int(rng.integers(3, 80))
        p = rng.uniform(0, 1, m)
        alpha = float(rng.uniform(0.01, 0.2))
        unit = WeightVector(np.ones(m), None, True)
        bonf = weighted_bonferroni(p, unit, alpha)
        if not np.array_equal(bonf, p <= alpha / m):
            return False, "weighted Bonferroni != Bonferroni at unit weights"
        adjusted, rej = weighted_bh(p, unit, alpha)
        order = np.argsort(p, kind="stable")
        ref = np.minimum.accumulate(
            (p[order] * m / np.arange(1, m + 1))[::-1])[::-1]
        ref_adj = np.empty(m)
        ref_adj[order] = np.minimum(ref, 1.0)
        if not (np.allclose(adjusted, ref_adj) and np.array_equal(rej, ref_adj <= alpha)):
            return False, "weighted BH != BH at unit weights"
    return True, "decisions identical on 100 random instances"


def _check_fwer_desk(seed, **_):
    sc = SimScenario(m=500, pi0=1.0, effect_grid=(0.0,), rho=0.0,
                     replications=80, alpha=0.05, seed=seed,
                     methods=("crw-cont", "dcw"), mode="fwer",
                     param_mode="estimated", mc_reps=1000, workers=2)
    met = simulate_metrics(sc)
    msgs, ok = [], True
    for meth in sc.methods:
        fw = met.get(0.0, meth, "fwer")
        se = met.get(0.0, meth, "fwer_se")
        ok = ok and fw <= 0.05 + 3 * max(se, 0.01)
        msgs.append(f"{meth}={fw:.3f}")
    return bool(ok), ", ".join(msgs) + " (limit .05+3SE)"


def _check_power_desk(seed, **_):
    sc = SimScenario(m=500, pi0=0.5, effect_grid=(2.0,), rho=0.3,
                     replications=40, alpha=0.05, seed=seed,
                     methods=("crw-cont",), mode="fdr", param_mode="oracle",
                     mc_reps=4000, workers=2)
    met = simulate_metrics(sc)
    power = met.get(2.0, "crw-cont", "power")
    return bool(abs(power - 0.474) <= 0.08), f"power={power:.3f} (target .474 +- .08 desk)"


def _check_discovery_gain(seed, **_):
    # low-power two-tailed RNA-seq-like shape: 82% null, diffuse weak
    # effects, right-skewed covariate correlated with effect size
    rng = np.random.default_rng(seed + 20240801)
    m = 12_000  # smaller sizes leave the gain ratio too seed-sensitive
    m1 = int(0.18 * m)
    is_alt = np.zeros(m, bool)
    is_alt[rng.permutation(m)[:m1]] = True
    eff = np.where(is_alt, rng.uniform(0.0, 2.4, m), 0.0)
    z = eff + rng.standard_normal(m)
    p = 2.0 * norm_sf(np.abs(z * rng.choice([-1.0, 1.0], m)))
    x = np.exp(0.5 * (eff + rng.standard_normal(m)))
    coll = TestCollection(p, x, tails=2)
    opts = AnalysisOptions(seed=seed, mc_reps=4000, use_boxcox=True)
    n_crw = int(run_analysis(coll, "crw-cont", 0.1, opts).rejected.sum())
    n_bh = int(run_analysis(coll, "bh", 0.1, opts).rejected.sum())
    ok = n_bh > 0 and n_crw >= 1.3 * n_bh
    return bool(ok), f"CRW {n_crw} vs BH {n_bh} rejections at alpha=.1"


CHECKS = [
    ("uniform-ranks-all-null", _check_uniform_ranks),
    ("approximation-fidelity", _check_approx_vs_bruteforce),
    ("weight-constraint", _check_weight_constraint),
    ("gcw-bw-equivalence", _check_gcw_bw_equivalence),
    ("weighted-identities", _check_weighted_identities),
    ("fwer-control", _check_fwer_desk),
    ("power-reproduction", _check_power_desk),
    ("discovery-gain", _check_discovery_gain),
]


def run_checks(seed: int = 0, norm_cdf_impl=None, stream=None):
    """Run the desk-scale suite; returns (all_passed, rows)."""
    import sys

    stream = stream or sys.stdout
    rows = []
    all_ok = True
    for name, fn in CHECKS:
        t0 = time.time()
        try:
            ok, detail = fn(seed, norm_cdf_impl=norm_cdf_impl)
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, f"error: {exc}"
        all_ok = all_ok and ok
        rows.append((name, ok, detail))
        print(f"[{'PASS' if ok else 'FAIL'}] {name:26s} {detail} "
              f"({time.time() - t0:.1f}s)", file=stream)
    return all_ok, rows
