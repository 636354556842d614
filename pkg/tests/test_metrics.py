import itertools

import numpy as np
import pytest
from scipy import stats as sps

from baritraj.metrics import (
    bca_interval,
    bland_altman,
    kruskal_wallis,
    mad,
    mann_whitney_u,
    normalized_metric,
    ols_baseline,
    rmse,
)


def enumerate_mwu_p(a, b):
    """Independent oracle: direct enumeration of every group assignment.

    Computes U for each C(n, n_a) split of the pooled values and the exact
    two-sided tail by distance of U from its null mean.
    """
    pooled = np.concatenate([a, b])
    n_a = len(a)
    n = len(pooled)

    def u_of(idx_a):
        ga = pooled[list(idx_a)]
        gb = np.delete(pooled, list(idx_a))
        u = 0.0
        for x in ga:
            for v in gb:
                if x > v:
                    u += 1.0
                elif x == v:
                    u += 0.5
        return u

    center = n_a * (n - n_a) / 2.0
    u_obs = u_of(range(n_a))
    obs_dist = abs(u_obs - center)
    total = 0
    extreme = 0
    for idx in itertools.combinations(range(n), n_a):
        total += 1
        if abs(u_of(idx) - center) >= obs_dist - 1e-12:
            extreme += 1
    return u_obs, extreme / total


class TestMad:
    def test_hand_values(self):
        assert mad([10, 20, 30], [12, 18, 33]) == pytest.approx(2.0)

    def test_identity(self):
        assert mad([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_single_pair(self):
        assert mad([5], [9]) == 4.0

    def test_even_length_averages_middle_pair(self):
        assert mad([0, 0, 0, 0], [1, 2, 3, 4]) == pytest.approx(2.5)

    def test_translation_consistency(self):
        rng = np.random.default_rng(0)
        p, o = rng.normal(size=50), rng.normal(size=50)
        assert mad(p + 7.3, o + 7.3) == pytest.approx(mad(p, o))

    def test_empty_errors(self):
        with pytest.raises(ValueError):
            mad([], [])


class TestRmse:
    def test_hand_values(self):
        assert rmse([0, 0], [3, 4]) == pytest.approx(3.5355, abs=5e-4)

    def test_identity(self):
        assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_constant_error(self):
        assert rmse([0, 0, 0], [-2, -2, -2]) == pytest.approx(2.0)

    def test_bias_variance_decomposition(self):
        rng = np.random.default_rng(1)
        p, o = rng.normal(size=200), rng.normal(size=200)
        e = o - p
        assert rmse(p, o) ** 2 == pytest.approx(e.mean() ** 2 + e.var(), rel=1e-9)

    def test_translation_consistency(self):
        rng = np.random.default_rng(2)
        p, o = rng.normal(size=50), rng.normal(size=50)
        assert rmse(p + 3.0, o + 3.0) == pytest.approx(rmse(p, o))


class TestNormalizedMetric:
    def test_mad_hand_value(self):
        assert normalized_metric([27, 33], [30, 30], "mad") == pytest.approx(10.0)

    def test_identity(self):
        assert normalized_metric([30, 40], [30, 40], "mad") == 0.0
        assert normalized_metric([30, 40], [30, 40], "rmse") == 0.0

    def test_rmse_single_value(self):
        assert normalized_metric([36], [40], "rmse") == pytest.approx(10.0)

    def test_rejects_non_positive_observed(self):
        with pytest.raises(ValueError):
            normalized_metric([1.0], [0.0], "mad")


class TestBcaInterval:
    def test_degenerate_data(self):
        result = bca_interval(np.full(10, 4.2), np.mean, B=200, seed=0)
        assert result.degenerate
        assert result.lo == result.hi == pytest.approx(4.2)

    def test_contains_point_estimate(self):
        rng = np.random.default_rng(3)
        for trial in range(20):
            data = rng.normal(size=30) + rng.uniform(-2, 2)
            result = bca_interval(data, np.mean, B=500, seed=trial)
            assert result.lo <= result.estimate <= result.hi

    def test_symmetric_data_close_to_percentile_interval(self):
        rng = np.random.default_rng(4)
        half = rng.normal(size=250)
        data = np.concatenate([half, -half])  # exactly symmetric around 0
        result = bca_interval(data, np.mean, B=10_000, seed=9)
        rng2 = np.random.default_rng(9)
        # percentile interval from an identically seeded bootstrap
        idx = np.random.default_rng(9).integers(0, len(data), size=(10_000, len(data)))
        boot = data[idx].mean(axis=1)
        plo, phi = np.quantile(boot, [0.025, 0.975])
        width = phi - plo
        assert abs(result.lo - plo) <= 0.02 * width + 1e-12
        assert abs(result.hi - phi) <= 0.02 * width + 1e-12

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        data = rng.normal(size=40)
        r1 = bca_interval(data, np.median, B=300, seed=7)
        r2 = bca_interval(data, np.median, B=300, seed=7)
        assert (r1.lo, r1.hi) == (r2.lo, r2.hi)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            bca_interval([1.0], np.mean)
        with pytest.raises(ValueError):
            bca_interval([1.0, 2.0], np.mean, B=50)

    def test_coverage_window_small(self):
        # smoke-scale coverage check; the acceptance suite runs the full tier
        rng = np.random.default_rng(6)
        hits = 0
        sims = 200
        for s in range(sims):
            data = rng.normal(size=100)
            r = bca_interval(data, np.mean, B=600, seed=s)
            hits += r.lo <= 0.0 <= r.hi
        assert 0.90 <= hits / sims <= 0.99


class TestBlandAltman:
    def test_identity(self):
        r = bland_altman([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert r.bias == 0.0 and (r.loa_lo, r.loa_hi) == (0.0, 0.0)

    def test_constant_offset(self):
        r = bland_altman([2.0, 3.0, 4.0], [1.0, 2.0, 3.0])
        assert r.bias == pytest.approx(1.0)
        assert r.sd == 0.0
        assert (r.loa_lo, r.loa_hi) == (pytest.approx(1.0), pytest.approx(1.0))

    def test_published_five_year_values(self):
        # mean difference -0.3 (SD 4.7) expands to limits (-9.51, 8.91)
        bias, sd = -0.3, 4.7
        assert round(bias - 1.96 * sd, 2) == -9.51
        assert round(bias + 1.96 * sd, 2) == 8.91
        rng = np.random.default_rng(7)
        obs = rng.normal(35, 5, size=4000)
        pred = obs + rng.normal(bias, sd, size=4000)
        r = bland_altman(pred, obs)
        assert r.loa_lo == pytest.approx(bias - 1.96 * sd, abs=0.35)
        assert r.loa_hi == pytest.approx(bias + 1.96 * sd, abs=0.35)

    def test_needs_two_pairs(self):
        with pytest.raises(ValueError):
            bland_altman([1.0], [2.0])

    def test_emits_pairs_for_plotting(self):
        r = bland_altman([2.0, 4.0], [1.0, 5.0])
        assert np.allclose(r.means, [1.5, 4.5])
        assert np.allclose(r.differences, [1.0, -1.0])


class TestMannWhitney:
    def test_identical_groups(self):
        r = mann_whitney_u([1, 2, 3], [1, 2, 3])
        assert r.statistic == pytest.approx(4.5)

    def test_complete_separation(self):
        r = mann_whitney_u([1, 2], [10, 20])
        assert r.statistic == 0.0  # U counts pairs where a > b

    def test_antisymmetry(self):
        rng = np.random.default_rng(8)
        for _ in range(25):
            a = rng.normal(size=rng.integers(2, 10))
            b = rng.normal(size=rng.integers(2, 10))
            assert mann_whitney_u(a, b).statistic + mann_whitney_u(b, a).statistic == pytest.approx(
                len(a) * len(b)
            )

    def test_exact_p_matches_enumeration_oracle(self):
        rng = np.random.default_rng(9)
        for trial in range(12):
            a = rng.normal(size=4)
            b = rng.normal(size=4)
            if trial % 3 == 0:
                b[0] = a[0]  # inject a tie
            r = mann_whitney_u(a, b)
            u_oracle, p_oracle = enumerate_mwu_p(a, b)
            assert r.method == "exact"
            assert r.statistic == pytest.approx(u_oracle, abs=1e-12)
            assert r.p_value == pytest.approx(p_oracle, abs=1e-10)

    def test_large_samples_use_normal_approximation(self):
        rng = np.random.default_rng(10)
        a = rng.normal(size=25)
        b = rng.normal(0.5, 1, size=25)
        r = mann_whitney_u(a, b)
        assert r.method == "normal"
        ref = sps.mannwhitneyu(a, b, alternative="two-sided", method="asymptotic", use_continuity=False)
        assert r.p_value == pytest.approx(ref.pvalue, rel=1e-9)

    def test_empty_group_errors(self):
        with pytest.raises(ValueError):
            mann_whitney_u([], [1.0])


class TestKruskalWallis:
    def test_identical_groups_h_zero(self):
        r = kruskal_wallis([[1, 2], [1, 2]])
        assert r.statistic == pytest.approx(0.0)
        assert r.p_value == pytest.approx(1.0)

    def test_well_separated_three_groups(self):
        # hand rank computation: ranks 1..6, rank sums 3/7/11 give H = 32/7,
        # the maximum for three groups of two; chi-squared (2 df) p = 0.1017
        r = kruskal_wallis([[1, 2], [10, 11], [20, 21]])
        assert r.statistic == pytest.approx(32.0 / 7.0)
        assert r.p_value == pytest.approx(float(sps.chi2.sf(32.0 / 7.0, 2)), rel=1e-12)
        assert r.p_value == pytest.approx(0.1017, abs=5e-4)

    def test_two_group_conclusion_agrees_with_mann_whitney(self):
        rng = np.random.default_rng(11)
        agreements = 0
        for _ in range(100):
            shift = rng.uniform(0, 1.2)
            a = rng.normal(size=25)
            b = rng.normal(shift, 1, size=25)
            mw = mann_whitney_u(a, b)
            kw = kruskal_wallis([a, b])
            agreements += (mw.p_value < 0.05) == (kw.p_value < 0.05)
        assert agreements == 100

    def test_matches_scipy(self):
        rng = np.random.default_rng(12)
        groups = [rng.normal(size=15), rng.normal(0.4, 1, size=12), rng.normal(size=18)]
        r = kruskal_wallis(groups)
        ref = sps.kruskal(*groups)
        assert r.statistic == pytest.approx(ref.statistic, rel=1e-9)
        assert r.p_value == pytest.approx(ref.pvalue, rel=1e-9)

    def test_needs_two_groups(self):
        with pytest.raises(ValueError):
            kruskal_wallis([[1.0, 2.0]])


class TestOlsBaseline:
    def test_noiseless_recovery(self):
        rng = np.random.default_rng(13)
        X = np.column_stack([np.ones(50), rng.normal(size=(50, 3))])
        beta = np.array([1.0, -2.0, 0.5, 3.0])
        fit = ols_baseline(X, X @ beta)
        assert np.max(np.abs(fit.coefficients - beta)) < 1e-8

    def test_intercept_only(self):
        y = np.array([1.0, 2.0, 3.0, 6.0])
        fit = ols_baseline(np.ones((4, 1)), y)
        assert fit.coefficients[0] == pytest.approx(y.mean())

    def test_residual_orthogonality(self):
        rng = np.random.default_rng(14)
        X = np.column_stack([np.ones(80), rng.normal(size=(80, 4))])
        y = rng.normal(size=80)
        fit = ols_baseline(X, y)
        assert np.max(np.abs(X.T @ fit.residuals)) < 1e-8

    def test_rank_deficiency_names_columns(self):
        rng = np.random.default_rng(15)
        a = rng.normal(size=30)
        X = np.column_stack([np.ones(30), a, 2 * a])
        with pytest.raises(ValueError, match="collinear"):
            ols_baseline(X, rng.normal(size=30), column_names=("const", "a", "twice_a"))
