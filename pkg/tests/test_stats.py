import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from corrugate.errors import InsufficientPoints, NonPositiveValue, ShapeMismatch, TooFewSamples
from corrugate.limitlaw import limit_bundle, limit_covariance_matrix, sample_limit
from corrugate.stats import (covariance_comparison, empirical_moments, kolmogorov_sf, ks_gof,
                             rate_fit)


def test_identical_samples_have_zero_covariance():
    mom = empirical_moments(np.ones((10, 2, 3)))
    assert np.all(mom.covariance == 0)
    np.testing.assert_array_equal(mom.mean, np.ones((2, 3)))


def test_two_point_covariance():
    v = np.array([1.0, -2.0, 0.5])
    mom = empirical_moments(np.stack([v, -v])[:, None, :])
    np.testing.assert_array_equal(mom.mean, np.zeros((1, 3)))
    np.testing.assert_allclose(mom.covariance, 2 * np.outer(v, v), rtol=1e-15)


def test_moments_against_numpy():
    x = np.random.default_rng(5).standard_normal((300, 2, 3))
    mom = empirical_moments(x)
    flat = x.reshape(300, -1)
    np.testing.assert_allclose(mom.covariance, np.cov(flat, rowvar=False), rtol=1e-12)
    c = mom.covariance
    np.testing.assert_allclose(mom.covariance_se[1, 4],
                               np.sqrt((c[1, 1] * c[4, 4] + c[1, 4] ** 2) / 299), rtol=1e-14)
    np.testing.assert_allclose(mom.mean_se.ravel(), np.sqrt(np.diag(c) / 300), rtol=1e-14)
    np.testing.assert_array_equal(mom.block(1, 0), c[3:6, 0:3])


def test_moments_need_two_samples():
    with pytest.raises(TooFewSamples):
        empirical_moments(np.zeros((1, 1, 3)))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 40))
def test_moments_permutation_invariant(seed, M):
    gen = np.random.default_rng(seed)
    x = gen.standard_normal((M, 2, 3)) * 10.0 ** gen.integers(-5, 5, size=(1, 2, 3))
    a = empirical_moments(x)
    b = empirical_moments(x[gen.permutation(M)])
    np.testing.assert_array_equal(a.mean, b.mean)
    np.testing.assert_array_equal(a.covariance, b.covariance)


def test_ks_exact_quantiles():
    N = 500
    x = sps.norm.ppf((np.arange(1, N + 1) - 0.5) / N)
    res = ks_gof(x, 1.0)
    assert res.statistic <= 0.5 / N + 1e-9
    assert res.p_value == 1.0


def test_ks_point_mass():
    res = ks_gof(np.zeros(50), 1.0)
    assert res.statistic == pytest.approx(0.5, abs=1e-15)
    assert res.degenerate


def test_ks_seeded_normal_draws():
    x = np.random.default_rng(2024).standard_normal(10_000)
    res = ks_gof(x, 1.0)
    assert res.p_value >= 0.01
    ref = sps.kstest(x, "norm")
    assert res.statistic == pytest.approx(ref.statistic, abs=1e-14)


@pytest.mark.parametrize("x", [0.3, 0.5, 0.8, 1.0, 1.36, 1.63, 2.5])
def test_kolmogorov_tail_matches_scipy(x):
    assert kolmogorov_sf(x) == pytest.approx(sps.kstwobign.sf(x), abs=1e-14)


def test_kolmogorov_small_argument():
    assert kolmogorov_sf(0.1) == 1.0
    assert kolmogorov_sf(0.0) == 1.0


def test_ks_preconditions():
    with pytest.raises(TooFewSamples):
        ks_gof(np.zeros(19), 1.0)
    with pytest.raises(ValueError):
        ks_gof(np.zeros(30), 0.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(1e-3, 1e3))
def test_ks_scale_invariance(seed, c):
    x = np.random.default_rng(seed).standard_normal(64) * 1.7
    a = ks_gof(x, 1.7)
    b = ks_gof(c * x, c * 1.7)
    assert abs(a.statistic - b.statistic) <= 1e-12


def test_rate_fit_exact_powers():
    ns = [8, 16, 32, 64, 128]
    fit = rate_fit(ns, [3.0 / n for n in ns])
    assert fit.slope == pytest.approx(-1.0, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert rate_fit(ns, [3.0 / np.sqrt(n) for n in ns]).slope == pytest.approx(-0.5, abs=1e-12)


def test_rate_fit_noisy():
    ns = 2 ** np.arange(3, 11)
    noise = 1 + 0.05 * np.random.default_rng(17).standard_normal(ns.size)
    assert -1.1 <= rate_fit(ns, 2.0 / ns * noise).slope <= -0.9


def test_rate_fit_errors():
    with pytest.raises(InsufficientPoints):
        rate_fit([1, 2, 3], [1, 1, 1])
    with pytest.raises(InsufficientPoints):
        rate_fit([1, 2, 2, 4], [1, 1, 1, 1])
    with pytest.raises(NonPositiveValue):
        rate_fit([1, 2, 3, 4], [1, 0, 1, 1])


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(1e-6, 1e6), min_size=4, max_size=8), st.floats(1e-6, 1e6))
def test_rate_fit_scale_invariance(values, c):
    ns = list(range(1, len(values) + 1))
    a = rate_fit(ns, values)
    b = rate_fit(ns, [c * v for v in values])
    assert b.slope == pytest.approx(a.slope, abs=1e-8)
    assert b.intercept == pytest.approx(a.intercept + np.log(c), abs=1e-8)


def test_comparison_exact_match():
    o = np.eye(3)
    rep = covariance_comparison(o, o, np.full((3, 3), 0.1))
    assert rep.all_pass and rep.worst_deviation == 0.0


def test_comparison_single_outlier():
    o = np.zeros((6, 6))
    se = np.full((6, 6), 0.01)
    e = o.copy()
    e[2, 4] = 0.1
    rep = covariance_comparison(e, o, se)
    assert not rep.pass_matrix[2, 4]
    assert rep.pass_matrix.sum() == 35
    assert rep.worst_deviation == pytest.approx(10.0)


def test_comparison_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        covariance_comparison(np.eye(3), np.eye(6), np.eye(3))


def test_limit_draws_pass_their_own_oracle(helix, g2):
    grid = [0.25, 0.5, 0.75, 1.0]
    bundle = limit_bundle(helix, g2)
    draws = sample_limit(bundle, grid, 2000, 42)
    mom = empirical_moments(draws)
    rep = covariance_comparison(mom.covariance, limit_covariance_matrix(bundle, grid),
                                mom.covariance_se)
    assert rep.all_pass


def test_two_sample_cross_check(helix, g2):
    # the one-sample test against the analytic marginal agrees with a two-sample test
    bundle = limit_bundle(helix, g2)
    a = sample_limit(bundle, [1.0], 2000, 1)[:, 0, :]
    b = sample_limit(bundle, [1.0], 2000, 2)[:, 0, :]
    _, _, Z = bundle.frames.at(np.array([1.0]))
    C = limit_covariance_matrix(bundle, [1.0])
    sigma = float(np.sqrt(Z[0] @ C @ Z[0]))
    assert ks_gof(a @ Z[0], sigma).p_value >= 0.01
    assert sps.ks_2samp(a @ Z[0], b @ Z[0]).pvalue >= 0.01
