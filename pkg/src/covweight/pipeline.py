"""End-to-end analysis: p-values + covariates in, weighted decisions out.

The pipeline converts p-values to normal scores, estimates the null
proportion (smoothed-spline tail estimator), estimates alternative effects
from the top-ranked statistics and a covariate-on-statistic regression
(optionally Box-Cox transformed), dispatches to a weighting family, and
applies weighted Bonferroni (FWER mode) or weighted BH (FDR mode).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

from . import crw, dcw, gcw
from .effects import PointMass, TestPopulation
from .mathkernel import fit_smoothing_spline
from .rankprob import McConfig, rank_prob_all_null, rank_prob_exact_mc
from .weights import SUM_TOL, WeightVector

__all__ = [
    "TestCollection",
    "NullEstimate",
    "EffectEstimate",
    "AnalysisOptions",
    "AnalysisResult",
    "METHODS",
    "pvals_to_stats",
    "estimate_pi0_storey",
    "estimate_effects",
    "weighted_bonferroni",
    "weighted_bh",
    "run_analysis",
]

P_CLAMP_MIN = 1e-300
STAT_FLOOR = -8.2  # score assigned to p = 1
MIN_TESTS_FOR_PI0 = 20

METHODS = ("crw-cont", "crw-bin", "gcw", "gcw2", "dcw", "bh", "bonferroni", "bw")

_METHOD_TAGS = {
    "crw-cont": "CRW-cont",
    "crw-bin": "CRW-bin",
    "gcw": "GCW",
    "gcw2": "GCW2",
    "dcw": "DCW",
    "bh": "BH",
    "bonferroni": "Bonferroni",
    "bw": "BW",
}


@dataclass
class TestCollection:
    """Raw analysis input: aligned p-values and covariates."""

    __test__ = False  # keep pytest from collecting this as a test class

    pvalues: np.ndarray
    covariates: np.ndarray
    tails: int = 1
    labels: list[str] | None = None

    def __post_init__(self):
        self.pvalues = np.asarray(self.pvalues, dtype=float)
        self.covariates = np.asarray(self.covariates, dtype=float)
        if self.pvalues.size < 1:
            raise ValueError("need at least one test")
        if self.pvalues.size != self.covariates.size:
            raise ValueError("pvalues and covariates must have equal length")
        if np.any(self.pvalues < 0) or np.any(self.pvalues > 1):
            raise ValueError("p-values must lie in [0, 1]")
        if self.tails not in (1, 2):
            raise ValueError("tails must be 1 or 2")

    @property
    def m(self):
        return self.pvalues.size


@dataclass(frozen=True)
class NullEstimate:
    pi0: float
    m0: int
    m1: int


@dataclass
class EffectEstimate:
    mean_test_effect: float
    median_test_effect: float
    predicted_mean_covariate_effect: float
    predicted_median_covariate_effect: float
    regression_slope: float
    regression_intercept: float
    r_squared: float
    boxcox_lambda: float | None = None
    defined: bool = True


@dataclass
class AnalysisOptions:
    """Knobs for run_analysis; oracle_* fields override estimation."""

    seed: int = 0
    mode: str = "fdr"  # "fdr" -> weighted BH, "fwer" -> weighted Bonferroni
    mc_reps: int = 10_000
    use_boxcox: bool = False
    n_groups: int | None = None  # dcw: fixed group count (else optimized)
    g_max: int = 10
    bins_per_group: int = 20
    smooth_df: float | None = None  # optional rank-prob curve smoothing
    bw_prior_sd: float = 1.0
    oracle_pi0: float | None = None
    oracle_mean_test_effect: float | None = None
    oracle_median_test_effect: float | None = None
    oracle_mean_covariate_effect: float | None = None
    oracle_median_covariate_effect: float | None = None


@dataclass
class AnalysisResult:
    weights: WeightVector
    adjusted_pvalues: np.ndarray
    rejected: np.ndarray
    method: str
    alpha: float
    diagnostics: dict = field(default_factory=dict)


def pvals_to_stats(collection: TestCollection):
    """Normal scores: upper-tail quantile of p (of p/2 for two-tailed).

    p is clamped below at 1e-300; p = 1 maps to the -8.2 floor.
    """
    p = np.clip(collection.pvalues, P_CLAMP_MIN, 1.0)
    if collection.tails == 2:
        p = p / 2.0
    with np.errstate(divide="ignore"):
        stats = -special.ndtri(p)
    return np.maximum(stats, STAT_FLOOR)


def estimate_pi0_storey(pvalues) -> NullEstimate:
    """Smoothed-spline tail estimate of the true-null proportion.

    pi0(lambda) = #{p > lambda} / (m (1 - lambda)) on lambda = .05...95,
    cubic-spline smoothed at df 3 and read off at lambda = .95; small
    inputs fall back to the conservative pi0 = 1.
    """
    p = np.asarray(pvalues, dtype=float)
    m = p.size
    if m < MIN_TESTS_FOR_PI0:
        return NullEstimate(1.0, m, 0)
    lams = np.arange(0.05, 0.951, 0.05)
    raw = np.array([(p > lam).mean() / (1.0 - lam) for lam in lams])
    fit = fit_smoothing_spline(lams, raw, 3.0)
    pi0 = float(np.clip(fit.predict(0.95), 0.0, 1.0))
    m0 = int(round(pi0 * m))
    return NullEstimate(pi0, m0, m - m0)


def _ols(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    vx = x.var()
    if vx == 0:
        raise ValueError("regression predictor has zero variance")
    slope = ((x - x.mean()) * (y - y.mean())).sum() / (x.var() * x.size)
    intercept = y.mean() - slope * x.mean()
    resid = y - intercept - slope * x
    vy = y.var()
    r2 = 1.0 - resid.var() / vy if vy > 0 else 0.0
    return slope, intercept, r2


def estimate_effects(stats, covariates, null_est: NullEstimate,
                     use_boxcox: bool = False) -> EffectEstimate:
    """Alternative-effect estimates from the top-m1 statistics and the
    covariate-on-statistic regression over all m tests."""
    stats = np.asarray(stats, dtype=float)
    cov = np.asarray(covariates, dtype=float)
    lam = None
    if use_boxcox:
        from .mathkernel import box_cox

        if np.any(cov <= 0):
            raise ValueError("Box-Cox needs positive covariates")
        cov, lam = box_cox(cov)
    slope, intercept, r2 = _ols(stats, cov)
    if null_est.m1 < 1:
        return EffectEstimate(
            np.nan, np.nan, np.nan, np.nan, slope, intercept, r2,
            boxcox_lambda=lam, defined=False,
        )
    order = np.argsort(-stats, kind="stable")
    top = stats[order[: null_est.m1]]
    mean_eff = float(top.mean())
    median_eff = float(np.median(top))
    return EffectEstimate(
        mean_test_effect=mean_eff,
        median_test_effect=median_eff,
        predicted_mean_covariate_effect=float(intercept + slope * mean_eff),
        predicted_median_covariate_effect=float(intercept + slope * median_eff),
        regression_slope=float(slope),
        regression_intercept=float(intercept),
        r_squared=float(r2),
        boxcox_lambda=lam,
    )


def _check_normalized(weights: WeightVector):
    m = weights.m
    if not weights.normalized or abs(weights.weights.sum() - m) > SUM_TOL * m:
        raise ValueError("weights must be normalized to sum m")


def weighted_bonferroni(pvalues, weights: WeightVector, alpha: float):
    """Reject test i iff p_i <= alpha * w_i / m."""
    _check_normalized(weights)
    p = np.asarray(pvalues, dtype=float)
    return p <= alpha * weights.weights / weights.m


def weighted_bh(pvalues, weights: WeightVector, alpha: float):
    """Step-up on the weighted p-values q_i = p_i / w_i.

    Returns (adjusted, rejected); zero-weight tests get adjusted p = 1.
    Unit weights reproduce the plain procedure exactly.
    """
    _check_normalized(weights)
    p = np.asarray(pvalues, dtype=float)
    w = weights.weights
    m = p.size
    q = np.full(m, np.inf)
    pos = w > 0
    q[pos] = p[pos] / w[pos]
    order = np.argsort(q, kind="stable")
    ranked = q[order] * m / np.arange(1, m + 1)
    adj_sorted = np.minimum.accumulate(ranked[::-1])[::-1]
    adjusted = np.empty(m)
    adjusted[order] = np.minimum(adj_sorted, 1.0)
    return adjusted, adjusted <= alpha


def _bonferroni_adjusted(pvalues, weights):
    w = weights.weights
    m = w.size
    adj = np.ones(m)
    pos = w > 0
    adj[pos] = np.minimum(np.asarray(pvalues)[pos] * m / w[pos], 1.0)
    return adj


# ---------------------------------------------------------------------------
# Method dispatch
# ---------------------------------------------------------------------------


def _unit_weights(m):
    return WeightVector(np.ones(m), None, True)


def _pipeline_estimates(collection, stats, options, diagnostics):
    if options.oracle_pi0 is not None:
        m = collection.m
        m0 = int(round(options.oracle_pi0 * m))
        null_est = NullEstimate(options.oracle_pi0, m0, m - m0)
    else:
        null_est = estimate_pi0_storey(collection.pvalues)
    diagnostics["pi0"] = null_est.pi0
    diagnostics["m0"] = null_est.m0
    diagnostics["m1"] = null_est.m1

    effects = estimate_effects(stats, collection.covariates, null_est,
                               use_boxcox=options.use_boxcox)
    try:
        rev_slope, rev_intercept, rev_r2 = _ols(collection.covariates, stats)
        diagnostics["reverse_regression"] = {
            "slope": rev_slope, "intercept": rev_intercept, "r_squared": rev_r2,
        }
    except ValueError:
        pass

    if options.oracle_mean_test_effect is not None:
        effects = replace(
            effects,
            mean_test_effect=options.oracle_mean_test_effect,
            median_test_effect=(
                options.oracle_median_test_effect
                if options.oracle_median_test_effect is not None
                else options.oracle_mean_test_effect
            ),
            defined=True,
        )
    if options.oracle_mean_covariate_effect is not None:
        effects = replace(
            effects,
            predicted_mean_covariate_effect=options.oracle_mean_covariate_effect,
            predicted_median_covariate_effect=(
                options.oracle_median_covariate_effect
                if options.oracle_median_covariate_effect is not None
                else options.oracle_mean_covariate_effect
            ),
        )
    diagnostics["effects"] = {
        "mean_test_effect": effects.mean_test_effect,
        "median_test_effect": effects.median_test_effect,
        "predicted_mean_covariate_effect": effects.predicted_mean_covariate_effect,
        "predicted_median_covariate_effect": effects.predicted_median_covariate_effect,
        "regression_slope": effects.regression_slope,
        "regression_intercept": effects.regression_intercept,
        "r_squared": effects.r_squared,
        "boxcox_lambda": effects.boxcox_lambda,
    }
    return null_est, effects


def _rank_probs_for(collection, null_est, covariate_effect, options):
    """Rank-probability curve of an alternative focal test at the predicted
    covariate effect, with the remaining alternatives at the same point."""
    m = collection.m
    if null_est.m1 < 1:
        return rank_prob_all_null(m)
    pop = TestPopulation(m, null_est.m0, null_est.m1,
                         PointMass(float(covariate_effect)))
    dist = rank_prob_exact_mc(
        pop, float(covariate_effect), False,
        McConfig(options.mc_reps, options.seed),
    )
    if options.smooth_df is not None:
        from .rankprob import smooth_rank_probs

        dist = smooth_rank_probs(dist, options.smooth_df)
    return dist


def _crw_method(collection, stats, alpha, options, diagnostics, binary):
    m = collection.m
    null_est, effects = _pipeline_estimates(collection, stats, options, diagnostics)
    if null_est.m1 < 1 or not effects.defined:
        diagnostics["fallback"] = "no estimated alternatives; uniform weights"
        return _unit_weights(m)
    if binary:
        test_effect = effects.median_test_effect
        cov_effect = effects.predicted_median_covariate_effect
    else:
        test_effect = effects.mean_test_effect
        cov_effect = effects.predicted_mean_covariate_effect
    dist = _rank_probs_for(collection, null_est, cov_effect, options)
    diagnostics["_rank_prob_curve"] = dist.probabilities
    order = dcw.order_by_covariate(collection.pvalues, collection.covariates)
    ranks = np.empty(m, dtype=int)
    ranks[order] = np.arange(m)
    per_test_probs = dist.probabilities[ranks]
    inputs = crw.CrwInputs(
        rank_probs=per_test_probs,
        mean_test_effect=float(test_effect),
        alpha=alpha,
        m=m,
        m1=max(null_est.m1, 1),
        tails=collection.tails,
    )
    wv = crw.crw_weights_binary(inputs) if binary else crw.crw_weights_continuous(inputs)
    diagnostics["delta"] = wv.delta
    return wv


def _gcw_method(collection, stats, alpha, options, diagnostics):
    m = collection.m
    null_est, effects = _pipeline_estimates(collection, stats, options, diagnostics)
    if null_est.m1 < 1 or not effects.defined:
        diagnostics["fallback"] = "no estimated alternatives; uniform weights"
        return _unit_weights(m)
    order = np.argsort(-stats, kind="stable")
    top = stats[order[: null_est.m1]]
    eta = float(top.mean())
    sigma = float(top.std(ddof=1)) if null_est.m1 > 1 else 0.0
    cov = collection.covariates.astype(float)
    tau = float(cov.std(ddof=1)) if m > 1 else 1.0
    nu_sq = max(tau * tau - sigma * sigma, 1e-8)
    params = gcw.GcwParams(
        eta=np.full(m, eta),
        sigma=np.full(m, sigma),
        nu=np.full(m, np.sqrt(nu_sq)),
        covariate=cov,
        density_ratio=np.ones(m),
    )
    diagnostics["gcw_params"] = {
        "eta": eta, "sigma": sigma, "tau": tau, "nu_sq": nu_sq,
    }
    wv = gcw.gcw_weights(params, alpha, m)
    diagnostics["lambda"] = wv.delta
    return wv


def _gcw2_method(collection, stats, alpha, options, diagnostics):
    m = collection.m
    null_est, effects = _pipeline_estimates(collection, stats, options, diagnostics)
    if null_est.m1 < 1 or not effects.defined:
        diagnostics["fallback"] = "no estimated alternatives; uniform weights"
        return _unit_weights(m)
    eta = effects.mean_test_effect
    yhat = effects.predicted_mean_covariate_effect
    cov = collection.covariates.astype(float)
    tau = float(cov.std(ddof=1)) if m > 1 else 1.0
    tau = max(tau, 1e-8)
    conditional = np.exp(-0.5 * ((cov - yhat) / tau) ** 2) / (
        tau * np.sqrt(2 * np.pi)
    )
    inputs = gcw.Gcw2Inputs(
        covariate_density=np.ones(m),
        conditional_density=np.maximum(conditional, 1e-300),
        mean_test_effect=float(eta),
        alpha=alpha,
        m=m,
    )
    wv = gcw.gcw2_weights(inputs)
    diagnostics["delta"] = wv.delta
    return wv


def _bw_method(collection, stats, alpha, options, diagnostics):
    m = collection.m
    sd = options.bw_prior_sd
    gamma = np.sqrt(1.0 + sd * sd)
    wv = gcw.bw_weights(collection.covariates.astype(float), np.full(m, gamma),
                        alpha, m)
    diagnostics["lambda"] = wv.delta
    diagnostics["bw_prior_sd"] = sd
    return wv


def _dcw_method(collection, stats, alpha, options, diagnostics):
    m = collection.m
    null_est, effects = _pipeline_estimates(collection, stats, options, diagnostics)
    if null_est.m1 < 1 or not effects.defined:
        diagnostics["fallback"] = "no estimated alternatives; uniform weights"
        return _unit_weights(m)
    effect = float(effects.mean_test_effect)
    if options.n_groups is not None:
        g_opt = options.n_groups
        df_opt = float(min(3.0, g_opt)) if g_opt >= 4 else float(g_opt)
    else:
        g_opt, df_opt = dcw.optimize_groups(
            collection.pvalues, collection.covariates,
            g_max=min(options.g_max, m), alpha=alpha,
            mean_test_effect=effect, m1=max(null_est.m1, 1),
            bins_per_group=options.bins_per_group,
        )
    cfg = dcw.GroupConfig(
        n_groups=g_opt, bins_per_group=options.bins_per_group,
        spline_df=df_opt if g_opt >= 4 else None,
    )
    perm = dcw.order_by_covariate(collection.pvalues, collection.covariates)
    probs = dcw.dcw_rank_probs(collection.pvalues[perm], cfg)
    wv_sorted = dcw.dcw_weights(probs, effect, alpha, m,
                                max(null_est.m1, 1), cfg)
    back = np.empty(m)
    back[perm] = wv_sorted.weights
    diagnostics["group_config"] = {"n_groups": g_opt, "spline_df": df_opt}
    diagnostics["_rank_prob_curve"] = np.repeat(probs.smoothed, dcw.group_sizes(m, g_opt))
    diagnostics["delta"] = wv_sorted.delta
    return WeightVector(back, wv_sorted.delta, True,
                        fallback_uniform=wv_sorted.fallback_uniform)


def run_analysis(collection: TestCollection, method: str, alpha: float = 0.05,
                 options: AnalysisOptions | None = None) -> AnalysisResult:
    """Execute one method end-to-end and apply the weighted decision rule."""
    options = options or AnalysisOptions()
    key = method.lower()
    if key not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    diagnostics = {"method": _METHOD_TAGS[key], "alpha": alpha,
                   "mode": options.mode, "seed": options.seed,
                   "tails": collection.tails}
    diagnostics["n_clamped_low"] = int((collection.pvalues < P_CLAMP_MIN).sum())
    diagnostics["n_clamped_high"] = int((collection.pvalues >= 1.0).sum())
    stats = pvals_to_stats(collection)

    if key == "bh" or key == "bonferroni":
        weights = _unit_weights(collection.m)
    elif key == "crw-cont":
        weights = _crw_method(collection, stats, alpha, options, diagnostics, False)
    elif key == "crw-bin":
        weights = _crw_method(collection, stats, alpha, options, diagnostics, True)
    elif key == "gcw":
        weights = _gcw_method(collection, stats, alpha, options, diagnostics)
    elif key == "gcw2":
        weights = _gcw2_method(collection, stats, alpha, options, diagnostics)
    elif key == "bw":
        weights = _bw_method(collection, stats, alpha, options, diagnostics)
    else:
        weights = _dcw_method(collection, stats, alpha, options, diagnostics)

    mode = options.mode
    if key == "bonferroni":
        mode = "fwer"
    elif key == "bh":
        mode = "fdr"
    if mode == "fwer":
        rejected = weighted_bonferroni(collection.pvalues, weights, alpha)
        adjusted = _bonferroni_adjusted(collection.pvalues, weights)
    else:
        adjusted, rejected = weighted_bh(collection.pvalues, weights, alpha)
    diagnostics["n_rejected"] = int(rejected.sum())
    return AnalysisResult(
        weights=weights,
        adjusted_pvalues=adjusted,
        rejected=rejected,
        method=_METHOD_TAGS[key],
        alpha=alpha,
        diagnostics=diagnostics,
    )
