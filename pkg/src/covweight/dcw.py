"""Data-driven covariate weights.

P-values are sorted by covariate rank and split into G equal groups; the
group-level rank probability is the relative frequency of the first
p-value bin (continuous effects) or the estimated alternative proportion
(binary effects), spline-smoothed over the group index and normalized.
Group weights follow the same upper-tail formula as the rank weights with
the multiplier grid-searched so group weights sum to G, then every member
of a group inherits its weight and the full vector renormalizes to m.
The group count and smoothing df are picked to maximize rejections.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .mathkernel import fit_smoothing_spline
from .weights import WeightVector, normalize_weights

__all__ = [
    "GroupConfig",
    "GroupRankProbs",
    "order_by_covariate",
    "group_sizes",
    "dcw_rank_probs",
    "dcw_weights",
    "optimize_groups",
]

PROB_FLOOR = 1e-12


@dataclass
class GroupConfig:
    n_groups: int
    bins_per_group: int = 20
    spline_df: float | None = None
    effect_type: str = "continuous"

    def __post_init__(self):
        if self.n_groups < 2:
            raise ValueError("need at least two groups")
        if self.bins_per_group < 2:
            raise ValueError("need at least two bins per group")
        if self.effect_type not in ("continuous", "binary"):
            raise ValueError("effect_type must be 'continuous' or 'binary'")
        if self.spline_df is not None and not 1 < self.spline_df <= self.n_groups:
            raise ValueError("spline_df must lie in (1, n_groups]")


@dataclass
class GroupRankProbs:
    raw: np.ndarray
    smoothed: np.ndarray
    normalized: bool = True
    diagnostics: dict = field(default_factory=dict)


def order_by_covariate(pvalues, covariates):
    """Permutation sorting covariates descending (rank 1 = largest);
    ties break by original index ascending."""
    pvalues = np.asarray(pvalues)
    covariates = np.asarray(covariates, dtype=float)
    if pvalues.size != covariates.size:
        raise ValueError("pvalues and covariates must have equal length")
    if not np.all(np.isfinite(covariates)):
        raise ValueError("covariates must be finite")
    return np.argsort(-covariates, kind="stable")


def group_sizes(m, n_groups):
    """Equal group sizes, remainder spread one each over the first groups."""
    if n_groups > m:
        raise ValueError("more groups than tests leaves an empty group")
    base, rem = divmod(m, n_groups)
    return np.array([base + (1 if g < rem else 0) for g in range(n_groups)])


def _group_slices(m, n_groups):
    sizes = group_sizes(m, n_groups)
    edges = np.concatenate([[0], np.cumsum(sizes)])
    return [slice(edges[g], edges[g + 1]) for g in range(n_groups)]


def dcw_rank_probs(sorted_pvalues, cfg: GroupConfig, pi0_estimator=None):
    """Group-level rank probabilities from covariate-sorted p-values."""
    p = np.asarray(sorted_pvalues, dtype=float)
    g = cfg.n_groups
    slices = _group_slices(p.size, g)
    raw = np.empty(g)
    if cfg.effect_type == "continuous":
        first_bin = 1.0 / cfg.bins_per_group
        for i, sl in enumerate(slices):
            raw[i] = np.mean(p[sl] < first_bin)
    else:
        if pi0_estimator is None:
            from .pipeline import estimate_pi0_storey

            pi0_estimator = lambda pv: estimate_pi0_storey(pv).pi0
        for i, sl in enumerate(slices):
            raw[i] = 1.0 - pi0_estimator(p[sl])

    diagnostics = {}
    if not np.any(raw > 0):
        smoothed = np.full(g, 1.0 / g)
        diagnostics["all_zero"] = True
        return GroupRankProbs(raw, smoothed, True, diagnostics)

    smoothed = raw.copy()
    if cfg.spline_df is not None and g >= 4:
        fit = fit_smoothing_spline(
            np.arange(1.0, g + 1.0), raw, min(cfg.spline_df, g)
        )
        smoothed = fit.values
        diagnostics["spline_penalty"] = fit.penalty
    smoothed = np.maximum(smoothed, PROB_FLOOR)
    smoothed = smoothed / smoothed.sum()
    return GroupRankProbs(raw, smoothed, True, diagnostics)


def dcw_weights(
    probs: GroupRankProbs,
    mean_test_effect: float,
    alpha: float,
    m: int,
    m1: int,
    cfg: GroupConfig,
) -> WeightVector:
    """Group weights replicated to members and normalized to sum m.

    The multiplier is grid-searched on (0, 1) step 0.001 minimizing
    |sum of group weights - G|; group algorithms use the grid only.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    g = cfg.n_groups
    f1 = np.maximum(probs.smoothed, PROB_FLOOR)
    if mean_test_effect <= 0:
        return WeightVector(
            np.ones(m), None, True, fallback_uniform=True,
            diagnostics={"fallback_reason": "mean test effect <= 0"},
        )
    if cfg.effect_type == "continuous":
        offsets = -np.log(alpha * f1)
    else:
        if m1 < 1:
            raise ValueError("binary group weights need m1 >= 1")
        offsets = np.log(m * m / (alpha * m1 * g * f1))

    e = mean_test_effect
    grid = np.arange(0.001, 1.0, 0.001)
    args = 0.5 * e + (np.log(grid)[:, None] + offsets[None, :]) / e
    sums = (g / alpha) * special.ndtr(-args).sum(axis=1)
    delta = float(grid[int(np.argmin(np.abs(sums - g)))])

    group_w = (g / alpha) * special.ndtr(-(0.5 * e + (np.log(delta) + offsets) / e))
    sizes = group_sizes(m, g)
    raw = np.repeat(group_w, sizes)
    out = normalize_weights(raw, delta)
    out.diagnostics["group_weights"] = group_w
    return out


def optimize_groups(
    pvalues,
    covariates,
    g_max: int,
    alpha: float,
    mean_test_effect: float,
    m1: int,
    effect_type: str = "continuous",
    use_bonferroni: bool = False,
    bins_per_group: int = 20,
):
    """Group count and spline df maximizing rejections.

    Ties break toward smaller g then smaller df; a rejection-free sweep
    returns (2, smallest df).  Rejections are counted under weighted BH by
    default (weighted Bonferroni behind the flag).
    """
    from .pipeline import weighted_bh, weighted_bonferroni

    if g_max < 2:
        raise ValueError("g_max must be >= 2")
    p = np.asarray(pvalues, dtype=float)
    m = p.size
    perm = order_by_covariate(p, covariates)
    sorted_p = p[perm]

    best = (2, 2.0, -1)
    for g in range(2, min(g_max, m) + 1):
        dfs = [float(d) for d in range(2, g + 1)] or [2.0]
        if g < 4:
            dfs = [float(g)]  # no smoothing below four groups
        for df in dfs:
            cfg = GroupConfig(
                n_groups=g, bins_per_group=bins_per_group,
                spline_df=df if g >= 4 else None, effect_type=effect_type,
            )
            probs = dcw_rank_probs(sorted_p, cfg)
            wv = dcw_weights(probs, mean_test_effect, alpha, m, m1, cfg)
            back = np.empty(m)
            back[perm] = wv.weights
            wv_back = WeightVector(back, wv.delta, True)
            if use_bonferroni:
                rejected = weighted_bonferroni(p, wv_back, alpha)
            else:
                _, rejected = weighted_bh(p, wv_back, alpha)
            count = int(rejected.sum())
            if count > best[2]:
                best = (g, df, count)
    return best[0], best[1]
