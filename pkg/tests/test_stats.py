import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fieldclt.stats import (bootstrap_ci, compatible, fsum_mean, ks_normal, loglog_fit, mean_se,
                            moment_slope, normality, sample_variance, standardize, variance_se)

floats = st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=2, max_size=50)


@given(floats)
def test_mean_and_variance_match_numpy(xs):
    x = np.array(xs)
    m, se = mean_se(x)
    assert m == pytest.approx(x.mean(), rel=1e-9, abs=1e-6)
    assert sample_variance(x) == pytest.approx(x.var(ddof=1), rel=1e-7, abs=1e-3)
    assert se == pytest.approx(math.sqrt(sample_variance(x) / x.size), rel=1e-9, abs=1e-6)


def test_fsum_mean_is_exact_on_cancellation():
    assert fsum_mean([1e16, 1.0, -1e16, 1.0]) == 0.5


def test_identical_values_have_zero_error():
    assert mean_se([3.0, 3.0])[1] == 0.0


def test_variance_se_for_normal_samples():
    x = np.random.default_rng(0).standard_normal(20000)
    assert variance_se(x) == pytest.approx(math.sqrt(2 / x.size), rel=0.05)


def test_bootstrap_interval_covers_the_mean():
    x = np.random.default_rng(1).standard_normal(400) + 2
    lo, hi = bootstrap_ci(x, seed=3)
    assert lo < x.mean() < hi
    assert hi - lo == pytest.approx(2 * 1.96 / 20, rel=0.2)


def test_ks_calibration_on_normal_samples():
    # p-values of genuinely normal samples should not be tiny
    rng = np.random.default_rng(5)
    ps = [normality(rng.standard_normal(1000)).ks_pvalue for _ in range(20)]
    assert min(ps) > 1e-3


def test_ks_detects_skewed_samples():
    x = np.random.default_rng(2).exponential(size=2000)
    rep = normality(x)
    assert rep.ks_pvalue < 1e-6 and rep.skewness > 1


def test_ks_on_rounded_normal_counts():
    # integer rounding of a normal sample must not by itself reject normality
    rng = np.random.default_rng(7)
    ps = [normality(np.round(30 + 7 * rng.standard_normal(2000))).ks_pvalue for _ in range(10)]
    assert min(ps) > 1e-3


def test_ks_still_detects_skewed_counts():
    x = np.random.default_rng(8).geometric(0.05, size=2000)
    assert normality(x).ks_pvalue < 1e-6


def test_standardize():
    z = standardize([1.0, 2.0, 3.0, 4.0])
    assert z.mean() == pytest.approx(0) and z.std(ddof=1) == pytest.approx(1)


def test_ks_statistic_bounds():
    D, p = ks_normal(np.linspace(-2, 2, 50))
    assert 0 <= D <= 1 and 0 <= p <= 1


@given(st.floats(-3, 3), st.floats(0.1, 10))
def test_loglog_fit_recovers_power(k, c):
    xs = np.array([1.0, 2.0, 4.0, 8.0])
    slope, intercept = loglog_fit(xs, c * xs**k)
    assert slope == pytest.approx(k, abs=1e-9)
    assert intercept == pytest.approx(math.log(c), abs=1e-9)


def test_moment_slope_on_scaled_samples():
    rng = np.random.default_rng(0)
    base = rng.poisson(5, 400) + 1.0
    samples = {R: base * R**2 for R in (2, 4, 8)}
    fit = moment_slope(samples, 3, n_boot=200)
    assert fit["slope"] == pytest.approx(6)
    assert fit["ci"][0] <= 6 <= fit["ci"][1] + 1e-9


def test_compatible():
    assert compatible([(0, 2), (1, 3), (1.5, 4)])
    assert not compatible([(0, 1), (2, 3)])
