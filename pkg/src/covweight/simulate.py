"""Simulation harness: power, FDR and FWER over effect grids.

Each replicate draws m tests with a prescribed null fraction, a covariate
statistic (effect + independent unit-normal noise) and a test statistic
(effect + block-equicorrelated noise), runs every requested method through
the weighted decision rule, and aggregates true/false-positive metrics
with standard errors.  Weight methods evaluate either at the known
scenario parameters (param_mode "oracle", the default for power grids) or
through the full estimation pipeline (param_mode "estimated", the design
used for the all-null error-rate studies).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from multiprocessing import get_context

import numpy as np

from . import crw, dcw, gcw
from .effects import PointMass, TestPopulation
from .mathkernel import norm_sf
from .pipeline import (
    AnalysisOptions,
    TestCollection,
    run_analysis,
    weighted_bh,
    weighted_bonferroni,
)
from .rankprob import McConfig, rank_prob_all_null, rank_prob_exact_mc
from .weights import WeightVector

__all__ = [
    "SimScenario",
    "SimMetrics",
    "gen_correlated_stats",
    "simulate_metrics",
    "group_dilution_demo",
    "effect_relationship_sim",
]


@dataclass
class SimScenario:
    m: int = 1000
    pi0: float = 0.5
    effect_grid: tuple = (2.0,)
    cv: float = 0.0
    rho: float = 0.0
    block_size: int = 100
    replications: int = 200
    alpha: float = 0.05
    seed: int = 0
    methods: tuple = ("crw-cont", "bh")
    mode: str = "fdr"  # "fdr" (weighted BH) or "fwer" (weighted Bonferroni)
    param_mode: str = "oracle"  # or "estimated"
    effect_dist: str = "uniform"  # alternative effects: "uniform" U(0, 2E) or "point"
    mc_reps: int = 10_000
    workers: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not 0 <= self.pi0 <= 1:
            raise ValueError("pi0 must lie in [0, 1]")
        if not 0 <= self.rho < 1:
            raise ValueError("rho must lie in [0, 1)")
        if self.rho > 0 and self.m % self.block_size != 0:
            raise ValueError("m must be divisible by block_size when rho > 0")
        if self.mode not in ("fdr", "fwer"):
            raise ValueError("mode must be 'fdr' or 'fwer'")
        if self.param_mode not in ("oracle", "estimated"):
            raise ValueError("param_mode must be 'oracle' or 'estimated'")
        if self.effect_dist not in ("uniform", "point"):
            raise ValueError("effect_dist must be 'uniform' or 'point'")

    @property
    def m1(self):
        return int(round((1.0 - self.pi0) * self.m))


@dataclass
class SimMetrics:
    """Tidy records: one row per (effect, method) with means and SEs."""

    records: list = field(default_factory=list)

    def rows(self):
        return list(self.records)

    def get(self, effect, method, metric):
        for r in self.records:
            if r["effect"] == effect and r["method"] == method:
                return r[metric]
        raise KeyError((effect, method, metric))


def gen_correlated_stats(m, rho, block_size, effects, seed=None, rng=None):
    """Effects plus block-equicorrelated unit-variance Gaussian noise.

    One-factor construction: sqrt(rho) * Z_block + sqrt(1 - rho) * Z_i,
    identical to the block-diagonal equicorrelation matrix draw.
    """
    if not 0 <= rho < 1:
        raise ValueError("rho must lie in [0, 1)")
    effects = np.asarray(effects, dtype=float)
    if effects.size != m:
        raise ValueError("effects must have length m")
    if rng is None:
        rng = np.random.Generator(np.random.Philox(seed or 0))
    if rho == 0:
        return effects + rng.standard_normal(m)
    if m % block_size != 0:
        raise ValueError("m must be divisible by block_size")
    n_blocks = m // block_size
    z_block = rng.standard_normal(n_blocks)
    noise = np.sqrt(rho) * np.repeat(z_block, block_size)
    noise += np.sqrt(1.0 - rho) * rng.standard_normal(m)
    return effects + noise


def _oracle_rank_weight_curves(scenario, effect, methods):
    """Weight-by-covariate-rank curves shared by every replicate of a point."""
    m, m1 = scenario.m, scenario.m1
    m0 = m - m1
    curves = {}
    wanted = [k for k in ("crw-cont", "crw-bin") if k in methods]
    if not wanted:
        return curves
    if m1 < 1 or effect <= 0:
        for k in wanted:
            curves[k] = np.ones(m)
        return curves
    pop = TestPopulation(m, m0, m1, PointMass(effect))
    dist = rank_prob_exact_mc(
        pop, effect, False, McConfig(scenario.mc_reps, scenario.seed)
    )
    for k in wanted:
        inputs = crw.CrwInputs(
            rank_probs=dist.probabilities, mean_test_effect=effect,
            alpha=scenario.alpha, m=m, m1=m1,
        )
        wv = (crw.crw_weights_continuous(inputs) if k == "crw-cont"
              else crw.crw_weights_binary(inputs))
        curves[k] = wv.weights
    return curves


def _oracle_weights(scenario, effect, method, covariates, rank_of_test, curves):
    m, m1 = scenario.m, scenario.m1
    pi1 = m1 / m
    if method in ("crw-cont", "crw-bin"):
        return WeightVector(curves[method][rank_of_test], None, True)
    if method == "bw":
        gamma = np.sqrt(2.0)
        return gcw.bw_weights(covariates, np.full(m, gamma), scenario.alpha, m)
    if method == "gcw":
        if m1 < 1 or effect <= 0:
            return WeightVector(np.ones(m), None, True)
        # moment-matched Gaussian prior for the null/alternative effect mixture
        eta = pi1 * effect
        e2 = effect * effect
        alt_var = e2 / 3.0 if scenario.effect_dist == "uniform" else 0.0
        sigma_sq = max(pi1 * alt_var + pi1 * (1 - pi1) * e2, 1e-8)
        params = gcw.GcwParams(
            eta=np.full(m, eta), sigma=np.full(m, np.sqrt(sigma_sq)),
            nu=np.ones(m), covariate=covariates,
        )
        return gcw.gcw_weights(params, scenario.alpha, m)
    raise ValueError(method)


def _replicate(scenario, effect, rep_index):
    rng = np.random.Generator(
        np.random.Philox(np.random.SeedSequence([scenario.seed, rep_index]))
    )
    m, m1 = scenario.m, scenario.m1
    is_alt = np.zeros(m, dtype=bool)
    if m1 > 0:
        is_alt[rng.permutation(m)[:m1]] = True
    # covariate effects carry the grid value as their MEAN; test effects
    # equal them (cv = 0) or scatter around them (cv > 0)
    tau = np.zeros(m)
    if m1 > 0:
        if scenario.effect_dist == "uniform":
            tau[is_alt] = rng.uniform(0.0, 2.0 * effect, m1)
        else:
            tau[is_alt] = effect
    if scenario.cv > 0 and m1 > 0:
        eps = np.zeros(m)
        eps[is_alt] = rng.normal(tau[is_alt], scenario.cv * effect)
    else:
        eps = tau.copy()
    covariates = tau + rng.standard_normal(m)
    stats = gen_correlated_stats(
        m, scenario.rho, scenario.block_size, eps, rng=rng
    )
    pvalues = norm_sf(stats)
    return is_alt, pvalues, covariates


def _decide(scenario, pvalues, weights):
    if scenario.mode == "fwer":
        return weighted_bonferroni(pvalues, weights, scenario.alpha)
    _, rejected = weighted_bh(pvalues, weights, scenario.alpha)
    return rejected


def _one_replicate_metrics(args):
    scenario, effect, rep_index, curves = args
    is_alt, pvalues, covariates = _replicate(scenario, effect, rep_index)
    m, m1 = scenario.m, scenario.m1
    rank_of_test = np.empty(m, dtype=int)
    rank_of_test[dcw.order_by_covariate(pvalues, covariates)] = np.arange(m)

    out = {}
    for method in scenario.methods:
        if method == "bonferroni":
            rejected = weighted_bonferroni(
                pvalues, WeightVector(np.ones(m), None, True), scenario.alpha
            )
        elif method == "bh":
            _, rejected = weighted_bh(
                pvalues, WeightVector(np.ones(m), None, True), scenario.alpha
            )
        elif scenario.param_mode == "oracle" and method in (
            "crw-cont", "crw-bin", "gcw", "bw"
        ):
            weights = _oracle_weights(
                scenario, effect, method, covariates, rank_of_test, curves
            )
            rejected = _decide(scenario, pvalues, weights)
        else:
            options = AnalysisOptions(
                seed=int(np.random.SeedSequence(
                    [scenario.seed, rep_index, 7]).generate_state(1)[0]),
                mode=scenario.mode,
                mc_reps=scenario.mc_reps,
            )
            if scenario.param_mode == "oracle":
                options.oracle_pi0 = scenario.pi0
                options.oracle_mean_test_effect = effect if effect > 0 else None
                options.oracle_mean_covariate_effect = effect if effect > 0 else None
            collection = TestCollection(pvalues, covariates)
            result = run_analysis(collection, method, scenario.alpha, options)
            rejected = result.rejected
        v = int((rejected & ~is_alt).sum())
        s = int((rejected & is_alt).sum())
        r = v + s
        out[method] = (
            s / m1 if m1 > 0 else np.nan,   # power
            v / max(r, 1),                   # false-discovery proportion
            1.0 if v >= 1 else 0.0,          # any false rejection
        )
    return out


def simulate_metrics(scenario: SimScenario) -> SimMetrics:
    """Run the scenario over its effect grid; seed-deterministic regardless
    of worker count (per-replicate seeds derive from (seed, index))."""
    records = []
    for effect in scenario.effect_grid:
        curves = (
            _oracle_rank_weight_curves(scenario, effect, scenario.methods)
            if scenario.param_mode == "oracle" else {}
        )
        tasks = [
            (scenario, effect, rep, curves)
            for rep in range(scenario.replications)
        ]
        if scenario.workers > 1:
            with get_context("fork").Pool(scenario.workers) as pool:
                per_rep = pool.map(_one_replicate_metrics, tasks, chunksize=4)
        else:
            per_rep = [_one_replicate_metrics(t) for t in tasks]
        for method in scenario.methods:
            vals = np.array([r[method] for r in per_rep], dtype=float)
            n = vals.shape[0]
            means, ses = np.full(3, np.nan), np.zeros(3)
            for col in range(3):
                col_vals = vals[:, col]
                col_vals = col_vals[~np.isnan(col_vals)]
                if col_vals.size:
                    means[col] = col_vals.mean()
                    if col_vals.size > 1:
                        ses[col] = col_vals.std(ddof=1) / np.sqrt(col_vals.size)
            records.append({
                "m": scenario.m, "pi0": scenario.pi0, "rho": scenario.rho,
                "cv": scenario.cv, "alpha": scenario.alpha, "mode": scenario.mode,
                "effect": effect, "method": method, "replications": n,
                "power": float(means[0]), "power_se": float(ses[0]),
                "fdr": float(means[1]), "fdr_se": float(ses[1]),
                "fwer": float(means[2]), "fwer_se": float(ses[2]),
            })
    return SimMetrics(records)


def group_dilution_demo(m, pi0_grid, effect, n_groups, replications, seed=0):
    """Alternative share and mean effect of the best covariate group.

    Demonstrates how rising null proportions dilute even the best group.
    """
    rows = []
    for pi0 in pi0_grid:
        m1 = int(round((1.0 - pi0) * m))
        props, means = [], []
        for rep in range(replications):
            rng = np.random.Generator(
                np.random.Philox(np.random.SeedSequence([seed, rep, int(pi0 * 1e6)]))
            )
            is_alt = np.zeros(m, dtype=bool)
            if m1 > 0:
                is_alt[rng.permutation(m)[:m1]] = True
            eff = np.where(is_alt, effect, 0.0)
            covariates = eff + rng.standard_normal(m)
            order = np.argsort(-covariates, kind="stable")
            best = order[: max(m // n_groups, 1)]
            props.append(is_alt[best].mean())
            means.append(eff[best].mean())
        props, means = np.array(props), np.array(means)
        rows.append({
            "pi0": pi0,
            "best_group_alt_proportion": float(props.mean()),
            "best_group_alt_proportion_se": float(props.std(ddof=1) / np.sqrt(len(props))) if replications > 1 else 0.0,
            "best_group_mean_effect": float(means.mean()),
            "best_group_mean_effect_se": float(means.std(ddof=1) / np.sqrt(len(means))) if replications > 1 else 0.0,
        })
    return rows


def effect_relationship_sim(m, m0, test_effect, rho_grid, replications=10_000,
                            inner_draws=5_000, seed=0):
    """Rank curves of a test given its TEST effect, through the conditional
    covariate effect e_y | e_t ~ N(rho * e_t, 1 - rho^2).

    Each Monte-Carlo draw samples e_y, evaluates the whole binary-effect
    population at that covariate effect (focal t ~ N(e_y, 1), alternative
    exceedance at e_y), and the expectation over e_y is the draw average.
    Returns per-rho curves plus the direct covariate-effect curve.
    """
    from . import kernels
    from .mathkernel import norm_sf
    from .rankprob import RankDistribution

    m1 = m - m0
    if m1 < 1:
        raise ValueError("needs at least one alternative test")
    pop = TestPopulation(m, m0, m1, PointMass(test_effect))
    mc = McConfig(replications, seed)
    direct = rank_prob_exact_mc(pop, test_effect, False, mc)
    out = {"direct_alt_curve": direct.probabilities, "rho": {}}
    accumulate = (kernels.exact_rank_pmf if m <= 500
                  else kernels.normal_rank_pmf)
    for rho in rho_grid:
        if not 0 <= rho < 1:
            raise ValueError("rho must lie in [0, 1)")
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence([seed, int(rho * 1e6)]))
        )
        eps_y = rng.normal(rho * test_effect, np.sqrt(1.0 - rho * rho),
                           inner_draws)
        reps = int(np.ceil(replications / inner_draws))
        eps_draws = np.tile(eps_y, reps)[:replications]
        t_draws = eps_draws + rng.standard_normal(replications)
        p0 = np.asarray(norm_sf(t_draws), dtype=float)
        p1 = np.asarray(norm_sf(t_draws - eps_draws), dtype=float)
        probs, se = accumulate(p0, p1, m0, m1 - 1, m)
        alt = RankDistribution(probs, se, test_effect, pop,
                               method="effect-relationship")
        out["rho"][rho] = {
            "alt_curve": alt.probabilities,
            "eps_y_mean": float(eps_y.mean()),
        }
    return out
