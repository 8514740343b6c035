import numpy as np
import pytest

from covweight.mathkernel import norm_sf
from covweight.simulate import (
    SimScenario,
    effect_relationship_sim,
    gen_correlated_stats,
    group_dilution_demo,
    simulate_metrics,
)


class TestCorrelatedStats:
    def test_rho_zero_near_independent(self):
        rng = np.random.default_rng(0)
        corrs = []
        for _ in range(50):
            z = gen_correlated_stats(400, 0.0, 100, np.zeros(400), rng=rng)
            corrs.append(np.corrcoef(z[:200], z[200:])[0, 1])
        assert abs(np.mean(corrs)) <= 3 / np.sqrt(200)

    def test_within_block_correlation(self):
        # the block factor is constant inside a replicate: estimate the
        # within-block correlation for a fixed position pair across draws
        rng = np.random.default_rng(1)
        draws = np.array([
            gen_correlated_stats(2_000, 0.9, 100, np.zeros(2_000), rng=rng)
            for _ in range(400)
        ])
        within = [np.corrcoef(draws[:, 100 * b + i], draws[:, 100 * b + j])[0, 1]
                  for b in range(20) for i, j in [(0, 50), (10, 90)]]
        across = [np.corrcoef(draws[:, 0], draws[:, 150])[0, 1],
                  np.corrcoef(draws[:, 230], draws[:, 1999])[0, 1]]
        assert abs(np.mean(within) - 0.9) <= 0.02
        assert np.abs(across).max() <= 0.15

    def test_marginal_moments(self):
        rng = np.random.default_rng(2)
        z = gen_correlated_stats(100_000, 0.5, 100, np.zeros(100_000), rng=rng)
        assert abs(z.mean()) <= 0.02
        assert abs(z.var() - 1.0) <= 0.02

    def test_effects_added(self):
        eff = np.arange(200.0)
        z = gen_correlated_stats(200, 0.0, 100, eff, seed=3)
        assert np.corrcoef(z, eff)[0, 1] > 0.999

    def test_validation(self):
        with pytest.raises(ValueError):
            gen_correlated_stats(10, 1.0, 5, np.zeros(10))
        with pytest.raises(ValueError):
            gen_correlated_stats(10, 0.5, 3, np.zeros(10))


class TestSimulateMetrics:
    def test_all_null_fwer_controlled(self):
        sc = SimScenario(m=400, pi0=1.0, effect_grid=(0.0,), replications=100,
                         alpha=0.05, seed=5, methods=("crw-cont", "bonferroni"),
                         mode="fwer", param_mode="estimated", mc_reps=800)
        met = simulate_metrics(sc)
        for meth in sc.methods:
            fwer = met.get(0.0, meth, "fwer")
            se = max(met.get(0.0, meth, "fwer_se"), np.sqrt(0.05 * 0.95 / 100))
            assert fwer <= 0.05 + 3 * se
        assert np.isnan(met.get(0.0, "crw-cont", "power"))

    def test_bh_matches_independent_implementation(self):
        sc = SimScenario(m=300, pi0=0.8, effect_grid=(2.0,), replications=20,
                         seed=9, methods=("bh",), mode="fdr")
        met = simulate_metrics(sc)

        # independent replay: regenerate each replicate and run textbook BH
        from covweight.simulate import _replicate

        powers = []
        for rep in range(20):
            is_alt, pvalues, _ = _replicate(sc, 2.0, rep)
            m = pvalues.size
            order = np.argsort(pvalues, kind="stable")
            thresh = 0.05 * np.arange(1, m + 1) / m
            passing = np.nonzero(pvalues[order] <= thresh)[0]
            k = passing.max() + 1 if passing.size else 0
            rejected = np.zeros(m, bool)
            rejected[order[:k]] = True
            powers.append((rejected & is_alt).sum() / is_alt.sum())
        assert met.get(2.0, "bh", "power") == pytest.approx(np.mean(powers))

    def test_seed_determinism_independent_of_workers(self):
        base = dict(m=200, pi0=0.9, effect_grid=(2.0,), replications=12,
                    seed=21, methods=("crw-cont", "bh"), mc_reps=500)
        serial = simulate_metrics(SimScenario(workers=1, **base))
        parallel = simulate_metrics(SimScenario(workers=2, **base))
        for r1, r2 in zip(serial.rows(), parallel.rows()):
            assert r1 == r2

    def test_fdr_controlled_in_bh_mode(self):
        sc = SimScenario(m=1_000, pi0=0.9, effect_grid=(2.0,), replications=60,
                         seed=13, methods=("crw-cont", "bh", "dcw"),
                         mode="fdr", param_mode="oracle", mc_reps=2000)
        met = simulate_metrics(sc)
        for meth in sc.methods:
            fdr = met.get(2.0, meth, "fdr")
            se = met.get(2.0, meth, "fdr_se")
            assert fdr <= 0.05 + 3 * max(se, 0.005)

    def test_scenario_validation(self):
        with pytest.raises(ValueError):
            SimScenario(m=150, rho=0.5, block_size=100)
        with pytest.raises(ValueError):
            SimScenario(pi0=1.2)
        with pytest.raises(ValueError):
            SimScenario(mode="fda")
        with pytest.raises(ValueError):
            SimScenario(param_mode="bootstrap")


class TestGroupDilution:
    def test_extremes(self):
        rows = group_dilution_demo(2_000, [0.0, 1.0], 2.0, 10, 10, seed=1)
        assert rows[0]["best_group_alt_proportion"] == pytest.approx(1.0)
        assert rows[1]["best_group_alt_proportion"] == pytest.approx(0.0)
        assert rows[1]["best_group_mean_effect"] == pytest.approx(0.0)

    def test_monotone_in_pi0(self):
        grid = [0.2, 0.5, 0.8, 0.95]
        rows = group_dilution_demo(2_000, grid, 2.0, 10, 30, seed=2)
        props = [r["best_group_alt_proportion"] for r in rows]
        ses = [r["best_group_alt_proportion_se"] for r in rows]
        for i in range(len(grid) - 1):
            assert props[i + 1] <= props[i] + 2 * (ses[i] + ses[i + 1])


class TestEffectRelationship:
    def test_rho_zero_independent_of_test_effect(self):
        out_a = effect_relationship_sim(50, 40, 2.0, [0.0], replications=40_000,
                                        inner_draws=4_000, seed=3)
        out_b = effect_relationship_sim(50, 40, 4.0, [0.0], replications=40_000,
                                        inner_draws=4_000, seed=3)
        dev = np.abs(out_a["rho"][0.0]["alt_curve"]
                     - out_b["rho"][0.0]["alt_curve"]).max()
        assert dev <= 0.01

    def test_rho_near_one_matches_direct(self):
        out = effect_relationship_sim(50, 40, 2.0, [0.99], replications=60_000,
                                      inner_draws=5_000, seed=4)
        dev = np.abs(out["rho"][0.99]["alt_curve"] - out["direct_alt_curve"]).max()
        assert dev <= 0.02

    def test_conditional_mean_of_sampler(self):
        out = effect_relationship_sim(30, 25, 3.0, [0.6], replications=20_000,
                                      inner_draws=5_000, seed=5)
        se = np.sqrt(1 - 0.6**2) / np.sqrt(5_000)
        assert abs(out["rho"][0.6]["eps_y_mean"] - 0.6 * 3.0) <= 3 * se
