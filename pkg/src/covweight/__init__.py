"""Covariate-informed p-value weighting for large-scale multiple testing.

Three weighting families built on the probabilistic relationship between
an independent covariate and the test effect sizes: rank-based weights
with exact and approximate rank-probability machinery, closed-form
Gaussian-covariate weights, and data-driven group weights, plus the
unweighted Bonferroni/BH baselines, an end-to-end analysis pipeline and a
simulation harness.
"""

from .crw import (
    CrwInputs,
    crw_weights_binary,
    crw_weights_continuous,
    crw_weights_exact,
    solve_delta,
)
from .dcw import (
    GroupConfig,
    GroupRankProbs,
    dcw_rank_probs,
    dcw_weights,
    optimize_groups,
    order_by_covariate,
)
from .effects import (
    EffectPrior,
    Exponential,
    NormalPrior,
    PointMass,
    TestPopulation,
    Uniform,
    alt_exceedance,
    null_exceedance,
    prior_mean,
)
from .gcw import (
    Gcw2Inputs,
    GcwParams,
    bw_weights,
    gcw2_weights,
    gcw_reparameterize,
    gcw_weights,
    lambda_lower_bound,
)
from .mathkernel import (
    SolverConfig,
    SplineFit,
    box_cox,
    box_cox_transform,
    brent_root,
    fit_smoothing_spline,
    grid_search_root,
    newton_raphson,
    norm_cdf,
    norm_quantile,
)
from .pipeline import (
    AnalysisOptions,
    AnalysisResult,
    EffectEstimate,
    NullEstimate,
    TestCollection,
    estimate_effects,
    estimate_pi0_storey,
    pvals_to_stats,
    run_analysis,
    weighted_bh,
    weighted_bonferroni,
)
from .rankprob import (
    McConfig,
    RankDistribution,
    rank_prob_all_null,
    rank_prob_bruteforce,
    rank_prob_exact_mc,
    rank_prob_normal_approx,
    smooth_rank_probs,
)
from .simulate import (
    SimMetrics,
    SimScenario,
    effect_relationship_sim,
    gen_correlated_stats,
    group_dilution_demo,
    simulate_metrics,
)
from .weights import WeightVector

__version__ = "0.1.0"
