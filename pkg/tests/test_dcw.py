import numpy as np
import pytest

from covweight.dcw import (
    GroupConfig,
    dcw_rank_probs,
    dcw_weights,
    group_sizes,
    optimize_groups,
    order_by_covariate,
)
from covweight.mathkernel import norm_sf
from covweight.pipeline import weighted_bh
from covweight.weights import WeightVector


def test_order_by_covariate_examples():
    assert np.array_equal(order_by_covariate([0.1, 0.2, 0.3], [3, 1, 2]), [0, 2, 1])
    assert np.array_equal(order_by_covariate([0.1] * 3, [5, 5, 5]), [0, 1, 2])
    assert np.array_equal(order_by_covariate([0.1, 0.2, 0.3], [1, 2, 3]), [2, 1, 0])


def test_order_by_covariate_validation():
    with pytest.raises(ValueError):
        order_by_covariate([0.1, 0.2], [1.0])
    with pytest.raises(ValueError):
        order_by_covariate([0.1], [np.nan])


def test_group_sizes_bookkeeping():
    for m, g in [(100, 10), (103, 10), (17, 4), (9, 9)]:
        sizes = group_sizes(m, g)
        assert sizes.sum() == m
        assert sizes.max() - sizes.min() <= 1
        # remainder goes to the leading (highest-rank) groups
        assert np.all(np.diff(sizes) <= 0)
    with pytest.raises(ValueError):
        group_sizes(3, 5)


def test_null_world_probs_uniform():
    rng = np.random.default_rng(0)
    p = rng.uniform(0, 1, 10_000)
    cfg = GroupConfig(n_groups=10, bins_per_group=20, spline_df=5.0)
    probs = dcw_rank_probs(p, cfg)
    # binomial noise: each first-bin frequency ~ Bin(1000, 1/20)/1000
    se = np.sqrt(0.05 * 0.95 / 1000) / (0.05 * 10)
    assert np.abs(probs.smoothed - 0.1).max() <= 3 * se
    assert probs.smoothed.sum() == pytest.approx(1.0)


def test_informative_covariate_probs_decrease():
    rng = np.random.default_rng(1)
    m, m1 = 10_000, 2000
    is_alt = np.zeros(m, bool)
    is_alt[rng.permutation(m)[:m1]] = True
    eff = np.where(is_alt, 2.0, 0.0)
    p = norm_sf(eff + rng.standard_normal(m))
    x = eff + rng.standard_normal(m)
    perm = order_by_covariate(p, x)
    cfg = GroupConfig(n_groups=10, spline_df=5.0)
    probs = dcw_rank_probs(p[perm], cfg)
    # leading groups carry the alternatives: decreasing over the first half
    assert np.all(np.diff(probs.smoothed[:5]) < 0)
    assert probs.smoothed[0] > 2 * probs.smoothed[-1]


def test_single_hot_group():
    # one fully alternative group with tiny p-values, nine null groups
    rng = np.random.default_rng(2)
    m = 1000
    p = rng.uniform(0, 1, m)
    p[:100] = rng.uniform(0, 1e-4, 100)
    x = np.zeros(m)
    x[:100] = 10.0
    perm = order_by_covariate(p, x)
    cfg = GroupConfig(n_groups=10, spline_df=None)
    probs = dcw_rank_probs(p[perm], cfg)
    assert probs.smoothed[0] > 5 * probs.smoothed[1:].max()


def test_all_zero_bins_fall_back_uniform():
    p = np.full(100, 0.9)
    cfg = GroupConfig(n_groups=5)
    probs = dcw_rank_probs(p, cfg)
    assert np.allclose(probs.smoothed, 0.2)
    assert probs.diagnostics.get("all_zero")


def test_binary_branch_uses_group_pi0():
    rng = np.random.default_rng(3)
    m = 4000
    p = np.concatenate([
        rng.uniform(0, 0.01, 700),  # alternative-rich leading block
        rng.uniform(0, 1, m - 700),
    ])
    cfg = GroupConfig(n_groups=4, effect_type="binary", spline_df=None)
    probs = dcw_rank_probs(p, cfg)
    assert probs.smoothed[0] > probs.smoothed[-1]
    assert probs.smoothed.sum() == pytest.approx(1.0)


def test_uniform_probs_give_unit_weights():
    from covweight.dcw import GroupRankProbs

    cfg = GroupConfig(n_groups=5)
    probs = GroupRankProbs(np.full(5, 0.2), np.full(5, 0.2))
    wv = dcw_weights(probs, 2.0, 0.05, 100, 20, cfg)
    assert np.abs(wv.weights - 1.0).max() <= 1e-6


def test_two_group_ordering():
    from covweight.dcw import GroupRankProbs

    cfg = GroupConfig(n_groups=2)
    probs = GroupRankProbs(np.array([0.9, 0.1]), np.array([0.9, 0.1]))
    wv = dcw_weights(probs, 2.0, 0.05, 50, 10, cfg)
    assert wv.weights[0] > wv.weights[-1]
    assert wv.weights.sum() == pytest.approx(50.0)
    # members of the same group share the weight
    assert np.unique(wv.weights).size == 2


def test_one_test_per_group_structural():
    from covweight.dcw import GroupRankProbs

    m = 12
    raw = np.geomspace(1.0, 0.1, m)
    raw /= raw.sum()
    cfg = GroupConfig(n_groups=m, spline_df=None)
    wv = dcw_weights(GroupRankProbs(raw, raw), 2.0, 0.05, m, 4, cfg)
    assert np.unique(wv.weights).size == m  # per-test weighting
    assert np.all(np.diff(wv.weights) < 0)


def test_binary_weight_formula_direction():
    from covweight.dcw import GroupRankProbs

    cfg = GroupConfig(n_groups=4, effect_type="binary")
    probs = GroupRankProbs(np.array([0.4, 0.3, 0.2, 0.1]),
                           np.array([0.4, 0.3, 0.2, 0.1]))
    wv = dcw_weights(probs, 2.0, 0.05, 80, 16, cfg)
    assert np.all(np.diff(np.unique(wv.weights)[::-1]) <= 0)
    assert wv.weights.sum() == pytest.approx(80.0)


def test_optimize_groups_pure_null_tie_rule():
    rng = np.random.default_rng(4)
    p = rng.uniform(0, 1, 400)
    x = rng.standard_normal(400)
    g_opt, df_opt = optimize_groups(p, x, g_max=8, alpha=0.05,
                                    mean_test_effect=2.0, m1=40)
    assert (g_opt, df_opt) == (2, 2.0)


def test_optimize_groups_matches_recomputation():
    rng = np.random.default_rng(5)
    m, m1 = 2000, 200
    is_alt = np.zeros(m, bool)
    is_alt[rng.permutation(m)[:m1]] = True
    eff = np.where(is_alt, 3.0, 0.0)
    p = norm_sf(eff + rng.standard_normal(m))
    x = eff + rng.standard_normal(m)
    g_opt, df_opt = optimize_groups(p, x, g_max=8, alpha=0.05,
                                    mean_test_effect=3.0, m1=m1)
    # independent re-run at the winning configuration
    perm = order_by_covariate(p, x)
    cfg = GroupConfig(n_groups=g_opt, spline_df=df_opt if g_opt >= 4 else None)
    probs = dcw_rank_probs(p[perm], cfg)
    wv = dcw_weights(probs, 3.0, 0.05, m, m1, cfg)
    back = np.empty(m)
    back[perm] = wv.weights
    _, rejected = weighted_bh(p, WeightVector(back, wv.delta, True), 0.05)
    best_count = rejected.sum()
    # no other configuration on the same grid does strictly better
    for g in range(2, 9):
        dfs = [float(d) for d in range(2, g + 1)] if g >= 4 else [float(g)]
        for df in dfs:
            cfg2 = GroupConfig(n_groups=g, spline_df=df if g >= 4 else None)
            probs2 = dcw_rank_probs(p[perm], cfg2)
            wv2 = dcw_weights(probs2, 3.0, 0.05, m, m1, cfg2)
            back2 = np.empty(m)
            back2[perm] = wv2.weights
            _, rej2 = weighted_bh(p, WeightVector(back2, wv2.delta, True), 0.05)
            assert rej2.sum() <= best_count


def test_permutation_safety():
    rng = np.random.default_rng(6)
    m = 600
    eff = np.where(rng.uniform(0, 1, m) < 0.2, 2.5, 0.0)
    p = norm_sf(eff + rng.standard_normal(m))
    x = eff + rng.standard_normal(m)

    def weights_for(p, x):
        perm = order_by_covariate(p, x)
        cfg = GroupConfig(n_groups=6, spline_df=4.0)
        probs = dcw_rank_probs(p[perm], cfg)
        wv = dcw_weights(probs, 2.5, 0.05, m, int(0.2 * m), cfg)
        back = np.empty(m)
        back[perm] = wv.weights
        return back

    w = weights_for(p, x)
    shuffle = rng.permutation(m)
    w_shuffled = weights_for(p[shuffle], x[shuffle])
    assert np.allclose(w[shuffle], w_shuffled)


def test_smoothing_df_at_g_converges_to_raw():
    rng = np.random.default_rng(7)
    p = rng.uniform(0, 1, 2000) ** 2  # non-uniform
    g = 8
    raw_cfg = GroupConfig(n_groups=g, spline_df=None)
    full_cfg = GroupConfig(n_groups=g, spline_df=float(g))
    raw = dcw_rank_probs(p, raw_cfg)
    full = dcw_rank_probs(p, full_cfg)
    assert np.abs(raw.smoothed - full.smoothed).max() <= 1e-8


def test_config_validation():
    with pytest.raises(ValueError):
        GroupConfig(n_groups=1)
    with pytest.raises(ValueError):
        GroupConfig(n_groups=4, bins_per_group=1)
    with pytest.raises(ValueError):
        GroupConfig(n_groups=4, spline_df=5.0)
    with pytest.raises(ValueError):
        GroupConfig(n_groups=4, effect_type="mixed")
