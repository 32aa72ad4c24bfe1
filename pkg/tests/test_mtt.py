import math

import numpy as np
import pytest

from covmtt import (
    DiffGrid,
    ThresholdParams,
    diff_grid,
    gumbel_a,
    gumbel_b,
    gumbel_upper_quantile,
    lambda_p,
    mtt_critical_value,
    mtt_scan,
    mtt_test_asymptotic,
    null_mean_tilde,
    null_var_tilde,
    single_level_test,
    t_stat,
    threshold_candidates,
)
from conftest import random_corpus


def make_grid(m_values, p, n1=20, n2=20):
    """Grid with prescribed M values (p(p+1)/2 of them)."""
    m = np.asarray(m_values, dtype=np.float64)
    assert m.size == p * (p + 1) // 2
    iu = np.triu_indices(p)
    return DiffGrid(
        p=p, rows=iu[0], cols=iu[1], f=np.sqrt(m), m=m,
        var_den=np.ones(m.size), n1=n1, n2=n2,
    )


def _ref_t(m, cut):
    """Filter-and-sum oracle, same descending accumulation order."""
    total = 0.0
    for v in sorted((float(v) for v in m if v > cut), reverse=True):
        total += v
    return total


def _ref_mu_sigma(s, p):
    """Closed-form null moments via erfc, independent of the package path."""
    lam = 4.0 * s * math.log(p)
    rt = math.sqrt(lam)
    q = p * (p + 1) // 2
    phi = math.exp(-0.5 * lam) / math.sqrt(2.0 * math.pi)
    sf = 0.5 * math.erfc(rt / math.sqrt(2.0))
    mu = q * (2.0 * rt * phi + 2.0 * sf)
    var = q * (2.0 * (lam * rt + 3.0 * rt) * phi + 6.0 * sf)
    return mu, var


def _ref_scan(grid, params):
    """Naive per-candidate recomputation of the scan."""
    logp = math.log(grid.p)
    top = 1.0 - params.eta
    pairs = sorted(
        {
            (float(m / (4.0 * logp)), float(m))
            for m in grid.m
            if params.s0 < m / (4.0 * logp) <= top
        }
    )
    if not pairs or pairs[-1][0] != top:
        pairs.append((top, 4.0 * top * logp))
    svals, tvals, zvals = [], [], []
    for s, cut in pairs:
        t = _ref_t(grid.m, cut)
        mu = null_mean_tilde(s, grid.p)
        sd = math.sqrt(null_var_tilde(s, grid.p))
        svals.append(s)
        tvals.append(t)
        zvals.append((t - mu) / sd)
    k = max(range(len(zvals)), key=lambda i: (zvals[i], -i))
    return svals, tvals, zvals, zvals[k], svals[k]


class TestLambdaP:
    def test_zero_s(self):
        assert lambda_p(0.0, 57) == 0.0

    def test_half_at_p_1000(self):
        assert lambda_p(0.5, 1000) == pytest.approx(13.815510557964274, abs=1e-12)

    def test_domain(self):
        with pytest.raises(ValueError):
            lambda_p(0.5, 1)
        with pytest.raises(ValueError):
            lambda_p(-0.1, 10)


class TestNullMoments:
    def test_s_zero_mean_is_q(self):
        for p in (5, 57, 200, 1000):
            q = p * (p + 1) // 2
            assert null_mean_tilde(0.0, p) == pytest.approx(q, rel=1e-12)
            assert null_var_tilde(0.0, p) == pytest.approx(3 * q, rel=1e-12)

    def test_lambda_four_factors(self):
        # choose s = 1/log p so lambda = 4; per-q factors are fixed numbers
        for p in (50, 431):
            q = p * (p + 1) // 2
            s = 1.0 / math.log(p)
            assert null_mean_tilde(s, p) / q == pytest.approx(
                0.26146412994911067, rel=1e-12
            )
            assert null_var_tilde(s, p) / q == pytest.approx(
                1.648247854058341, rel=1e-12
            )

    def test_matches_erfc_form(self):
        for s in (0.3, 0.5, 0.6, 0.8, 0.95):
            for p in (10, 100, 1000):
                mu, var = _ref_mu_sigma(s, p)
                assert null_mean_tilde(s, p) == pytest.approx(mu, rel=1e-12)
                assert null_var_tilde(s, p) == pytest.approx(var, rel=1e-12)

    def test_decreasing_in_s(self):
        mus = [null_mean_tilde(s, 200) for s in (0.5, 0.6, 0.7)]
        assert mus[0] > mus[1] > mus[2]
        vars_ = [null_var_tilde(s, 200) for s in (0.5, 0.6, 0.7)]
        assert vars_[0] > vars_[1] > vars_[2]

    def test_variance_positive_on_grid(self):
        for p in (10, 100, 1000):
            for s in np.linspace(0.0, 1.0, 21):
                assert null_var_tilde(float(s), p) > 0.0


class TestTStat:
    def test_zero_grid(self):
        g = make_grid(np.zeros(10), 4)
        assert t_stat(g, 0.7) == 0.0

    def test_threshold_above_max(self):
        g = make_grid(np.linspace(0.0, 2.0, 10), 4)
        s_max = 2.0 / (4.0 * math.log(4)) + 0.01
        assert t_stat(g, s_max) == 0.0

    def test_t_at_zero_is_total(self):
        m = np.random.default_rng(3).uniform(0.0, 5.0, 15)
        g = make_grid(m, 5)
        assert t_stat(g, 0.0) == pytest.approx(m.sum(), rel=1e-13)

    def test_fixed_grid_matches_filter_oracle(self):
        rng = np.random.default_rng(10)
        m = rng.uniform(0.0, 12.0, 10)
        g = make_grid(m, 4)
        for s in (0.5, 0.6, 0.7):
            assert t_stat(g, s) == _ref_t(m, lambda_p(s, 4))

    def test_strict_inequality(self):
        logp = math.log(4)
        m = np.zeros(10)
        m[3] = 4.0 * 0.5 * logp  # exactly at the cut
        g = make_grid(m, 4)
        assert t_stat(g, 0.5) == 0.0


class TestThresholdParams:
    def test_defaults(self):
        tp = ThresholdParams()
        assert (tp.s0, tp.eta, tp.alpha) == (0.5, 0.05, 0.05)

    def test_auto_rules(self):
        assert ThresholdParams.auto_exponential().s0 == 0.5
        tp = ThresholdParams.auto_polynomial(1.5)
        assert tp.s0 == pytest.approx(0.5 - 1.5 / 4.0)
        assert tp.s0_rule == "auto_polynomial"
        with pytest.raises(ValueError):
            ThresholdParams.auto_polynomial(2.5)

    def test_validation(self):
        with pytest.raises(ValueError):
            ThresholdParams(alpha=0.0)
        with pytest.raises(ValueError):
            ThresholdParams(s0=0.97, eta=0.05)
        with pytest.raises(ValueError):
            ThresholdParams(s0=-0.1)
        with pytest.raises(ValueError):
            ThresholdParams(eta=0.0)


class TestCandidates:
    def test_zero_grid_endpoint_only(self):
        g = make_grid(np.zeros(10), 4)
        cand = threshold_candidates(g, ThresholdParams())
        assert np.array_equal(cand, np.array([0.95]))

    def test_interval_filter(self):
        logp = math.log(4)
        m = np.zeros(10)
        m[:4] = np.array([0.3, 0.55, 0.9, 1.2]) * 4.0 * logp
        g = make_grid(m, 4)
        cand = threshold_candidates(g, ThresholdParams())
        np.testing.assert_allclose(cand, [0.55, 0.9, 0.95], rtol=1e-12)

    def test_matches_brute_force(self):
        for seed in (0, 1, 2):
            x, y = random_corpus(seed)
            g = diff_grid(x, y)
            params = ThresholdParams(s0=0.25, eta=0.1)
            logp = math.log(g.p)
            want = {s for s in (g.m / (4.0 * logp)) if params.s0 < s <= 0.9}
            want.add(1.0 - params.eta)
            got = threshold_candidates(g, params)
            assert sorted(want) == list(got)


class TestScan:
    def test_zero_grid(self):
        g = make_grid(np.zeros(10), 4)
        scan = mtt_scan(g, ThresholdParams())
        assert list(scan.candidates) == [0.95]
        assert list(scan.t_of_s) == [0.0]
        mu = null_mean_tilde(0.95, 4)
        sd = math.sqrt(null_var_tilde(0.95, 4))
        assert scan.v_n == (0.0 - mu) / sd
        assert scan.v_n < 0.0

    def test_single_entry_candidates_and_exclusion(self):
        p = 5
        logp = math.log(p)
        m = np.zeros(15)
        m[7] = 0.8 * 4.0 * logp
        g = make_grid(m, p)
        scan = mtt_scan(g, ThresholdParams())
        np.testing.assert_allclose(scan.candidates, [0.8, 0.95], rtol=1e-12)
        # strict inequality: the generating entry is excluded at its own level
        assert list(scan.t_of_s) == [0.0, 0.0]
        for k, s in enumerate(scan.candidates):
            mu = null_mean_tilde(float(s), p)
            sd = math.sqrt(null_var_tilde(float(s), p))
            assert scan.standardized[k] == (0.0 - mu) / sd
        # T below the entry's level still includes it
        assert t_stat(g, 0.7) == m[7]

    def test_corpus_scan_equals_naive(self):
        for seed in range(6):
            x, y = random_corpus(seed)
            g = diff_grid(x, y)
            for params in (ThresholdParams(), ThresholdParams(s0=0.25, eta=0.1)):
                scan = mtt_scan(g, params)
                svals, tvals, zvals, v, arg = _ref_scan(g, params)
                assert list(scan.candidates) == svals
                assert list(scan.t_of_s) == tvals  # exact, shared order
                assert list(scan.standardized) == zvals
                assert scan.v_n == v
                assert scan.argmax_s == arg

    def test_first_attaining_tie(self):
        # two equal M values give one candidate; argmax falls on the first
        # (smallest s) among equal standardized values
        g = make_grid(np.zeros(10), 4)
        scan = mtt_scan(g, ThresholdParams())
        assert scan.argmax_s == scan.candidates[0]

    def test_t_of_s_nonincreasing(self):
        x, y = random_corpus(12)
        g = diff_grid(x, y)
        scan = mtt_scan(g, ThresholdParams(s0=0.1))
        assert np.all(np.diff(scan.t_of_s) <= 0.0)


class TestGumbelConstants:
    def test_a_at_e(self):
        assert gumbel_a(math.e) == math.sqrt(2.0)

    def test_a_composition(self):
        p = math.exp(math.e)
        assert gumbel_a(math.log(p)) == pytest.approx(math.sqrt(2.0), rel=1e-15)

    def test_b_value(self):
        assert gumbel_b(math.e, 0.5, 0.05) == pytest.approx(0.6291273608575284, abs=1e-12)

    def test_domain_errors(self):
        for y in (1.0, 0.5, -2.0):
            with pytest.raises(ValueError):
                gumbel_a(y)
            with pytest.raises(ValueError):
                gumbel_b(y, 0.5, 0.05)
        with pytest.raises(ValueError):
            gumbel_b(math.e, 0.7, 0.3)

    def test_upper_quantile(self):
        assert gumbel_upper_quantile(0.05) == pytest.approx(2.9701952490421637, abs=1e-12)
        with pytest.raises(ValueError):
            gumbel_upper_quantile(0.0)


class TestSingleLevel:
    def test_zero_grid_never_rejects(self):
        g = make_grid(np.zeros(10), 4)
        out = single_level_test(g, 0.6, 0.05)
        assert not out.reject
        assert out.statistic == 0.0
        assert out.p_value > 0.5

    def test_enormous_entry_rejects(self):
        p = 20
        m = np.zeros(p * (p + 1) // 2)
        m[42] = 100.0 * math.log(p)
        g = make_grid(m, p)
        out = single_level_test(g, 0.6, 0.05)
        assert out.reject
        mu = null_mean_tilde(0.6, p)
        sd = math.sqrt(null_var_tilde(0.6, p))
        from scipy.stats import norm

        assert out.critical_value == pytest.approx(mu + norm.isf(0.05) * sd, rel=1e-12)

    def test_warns_outside_band(self):
        g = make_grid(np.zeros(10), 4)
        with pytest.warns(UserWarning, match="outside"):
            single_level_test(g, 0.3, 0.05)

    def test_alpha_validation(self):
        g = make_grid(np.zeros(10), 4)
        with pytest.raises(ValueError):
            single_level_test(g, 0.6, 1.5)

    def test_empirical_size_in_band(self):
        # independent Gaussian null, moderate scale; the one-level normal
        # calibration is anti-conservative here, so the band is loose
        hits = 0
        reps = 300
        for b in range(reps):
            rng = np.random.default_rng(9000 + b)
            x = rng.standard_normal((60, 60))
            y = rng.standard_normal((60, 60))
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                out = single_level_test(diff_grid(x, y), 0.6, 0.05)
            hits += out.reject
        assert 0.005 <= hits / reps <= 0.25


class TestAsymptoticTest:
    def test_zero_grid_never_rejects(self):
        g = make_grid(np.zeros(10), 4)
        out = mtt_test_asymptotic(g)
        assert not out.reject
        assert out.statistic < 0.0 < out.critical_value

    def test_small_p_domain_error(self):
        g = make_grid(np.zeros(6), 3)
        with pytest.raises(ValueError, match="bootstrap"):
            mtt_test_asymptotic(g)

    def test_critical_value_formula(self):
        params = ThresholdParams(s0=0.4, eta=0.1, alpha=0.1)
        p = 150
        y = math.log(p)
        want = (gumbel_upper_quantile(0.1) + gumbel_b(y, 0.4, 0.1)) / gumbel_a(y)
        assert mtt_critical_value(p, params) == pytest.approx(want, rel=1e-14)

    def test_decision_consistent_with_p_value(self):
        for seed in range(8):
            x, y = random_corpus(seed)
            out = mtt_test_asymptotic(diff_grid(x, y))
            assert 0.0 <= out.p_value <= 1.0
            assert out.reject == (out.p_value < out.params["alpha"])

    def test_params_echo(self):
        x, y = random_corpus(4)
        out = mtt_test_asymptotic(diff_grid(x, y))
        assert out.method == "mtt_asymptotic"
        assert out.params["s0"] == 0.5
        assert out.params["eta"] == 0.05
        assert out.params["p"] == x.shape[1]


def test_gumbel_limit_distributional_check(h0_reference_mc):
    """Empirical law of a*V_n - b near its extreme-value limit.

    Convergence is log-log slow in the center of the distribution, so the
    pointwise check sits on the right side only; the size check at the
    asymptotic critical value is the operational statement.
    """
    ref = h0_reference_mc
    p = ref["p"]
    y = math.log(p)
    z = gumbel_a(y) * ref["v"] - gumbel_b(y, 0.5, 0.05)
    for x in (1.0, 2.0, 3.0):
        emp = float(np.mean(z <= x))
        assert emp == pytest.approx(math.exp(-math.exp(-x)), abs=0.1)
    crit = mtt_critical_value(p, ThresholdParams())
    size = float(np.mean(ref["v"] > crit))
    assert 0.02 <= size <= 0.12
