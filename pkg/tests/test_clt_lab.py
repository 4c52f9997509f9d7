import itertools
import math

import numpy as np
import pytest

from fieldclt import clt_lab
from fieldclt.domain import BoxDomain
from fieldclt.errors import WindowTooSmall
from fieldclt.kernels import KernelSpec
from fieldclt.sampler import (RADEMACHER_LAW, WhiteNoiseGrid, derive_seed, noise_extent,
                              sample_field)
from fieldclt.stats import compatible
from fieldclt.topology import ES, count_interior


def test_density_reproducible(bf2):
    a = clt_lab.estimate_density(bf2, 0.0, ES, R=4, trials=6, seed=3)
    b = clt_lab.estimate_density(bf2, 0.0, ES, R=4, trials=6, seed=3)
    assert a.mean == b.mean and a.std_error == b.std_error
    assert np.array_equal(a.values, b.values)


def test_identical_seeds_give_zero_error(bf2):
    est = clt_lab.estimate_density(bf2, 0.0, ES, R=3, seed=1, seeds=[11, 11])
    assert est.std_error == 0.0


def test_density_is_positive_at_level_zero(bf2):
    est = clt_lab.estimate_density(bf2, 0.0, ES, R=8, trials=80, seed=2)
    assert est.mean - 3 * est.std_error > 0


def test_far_tail_density_is_negligible(bf2):
    est = clt_lab.estimate_density(bf2, 8.0, ES, R=6, trials=10, seed=2)
    assert est.mean == 0.0


def test_level_scan_shares_samples(bf2):
    scan = clt_lab.level_scan(bf2, [0.0, 1.0], R=4, trials=5, seed=1)
    single = clt_lab.estimate_density(bf2, 1.0, ES, R=4, trials=5, seed=1)
    assert scan[1].mean == single.mean


def test_sparse_counts_have_variance_near_mean(short_kernel_1d):
    # at a high level excursions are rare and nearly independent: Var ~ mean
    counts = clt_lab.count_samples(short_kernel_1d, [2.0], ES, 16, 0.25, 600, 4)[:, 0]
    r = clt_lab.variance_ratio(counts, 1.0, n_boot=300)
    assert abs(r["ratio"] - r["mean"]) < 3 * r["std_error"]


def test_variance_flat_for_short_range_kernel(short_kernel_1d):
    rows = clt_lab.variance_scaling(short_kernel_1d, 0.0, ES, (4, 8, 16), 0.25, 300, 9,
                                    n_boot=300)
    assert compatible([r["ci"] for r in rows])
    assert all(r["ci"][0] > 0 for r in rows)


def test_normality_needs_enough_trials(bf2):
    with pytest.raises(ValueError):
        clt_lab.clt_normality_test(bf2, 0.0, trials=10)


def test_normality_on_supplied_counts():
    counts = np.random.default_rng(0).poisson(400, 1500)
    rep = clt_lab.clt_normality_test(None, 0.0, counts=counts)
    assert abs(rep["skewness"]) < 0.15 and rep["ks_pvalue"] > 0.01


def test_sigma_window_too_small(bf2):
    with pytest.raises(WindowTooSmall):
        clt_lab.estimate_sigma_resampling(bf2, 0.0, ES, R_win=4, outer_trials=1, inner_trials=1)


def exact_sigma_squared(kernel, level, R_win):
    """E[E[Delta_0 | cubes <= 0]^2] by enumerating every +-1 noise configuration (h = 1)."""
    D = BoxDomain.cube(R_win, 1)
    ext = noise_extent(kernel, D, 1.0)
    cubes = ext.cubes()
    n_frozen = cubes.index((0,))
    n_free = len(cubes) - n_frozen - 1
    cache = {}

    def count(config):
        if config not in cache:
            noise = WhiteNoiseGrid(1.0, ext.lower, np.array(config, float), law=RADEMACHER_LAW)
            cache[config] = count_interior(sample_field(kernel, D, 1.0, noise=noise, max_order=0),
                                           None, level, ES)
        return cache[config]

    squares = []
    for before in itertools.product((-1, 1), repeat=n_frozen + 1):
        deltas = [count(before + after) - count(before[:-1] + (new,) + after)
                  for after in itertools.product((-1, 1), repeat=n_free) for new in (-1, 1)]
        squares.append(np.mean(deltas) ** 2)
    return float(np.mean(squares))


def test_sigma_estimator_matches_exhaustive_enumeration(short_kernel_1d):
    exact = exact_sigma_squared(short_kernel_1d, 0.1, 3)
    assert exact > 0
    est = clt_lab.estimate_sigma_resampling(short_kernel_1d, 0.1, ES, R_win=3, h=1.0,
                                            outer_trials=200, inner_trials=20, seed=3,
                                            noise_law=RADEMACHER_LAW)
    assert abs(est.sigma_squared - exact) < 3 * est.std_error
    assert abs(est.delta_mean) < 3 * est.delta_se


def test_sigma_reproducible(short_kernel_1d):
    a = clt_lab.estimate_sigma_resampling(short_kernel_1d, 0.0, ES, R_win=3, h=0.5,
                                          outer_trials=5, inner_trials=3, seed=1)
    b = clt_lab.estimate_sigma_resampling(short_kernel_1d, 0.0, ES, R_win=3, h=0.5,
                                          outer_trials=5, inner_trials=3, seed=1)
    assert np.array_equal(a.products, b.products)


def test_stabilization_with_identical_resample(bf2):
    res = clt_lab.stabilization_probe(bf2, 0.0, ES, (4, 6), trials=4, seed=2, same_resample=True)
    assert np.all(res["deltas"] == 0)
    assert res["fraction_differs"] == [0.0, 0.0]


def test_stabilization_for_short_range_kernel(short_kernel_1d):
    res = clt_lab.stabilization_probe(short_kernel_1d, 0.0, ES, (2, 3, 4, 6, 8), trials=200,
                                      seed=5)
    frac = res["fraction_differs"]
    assert frac[-1] == 0.0
    assert all(b <= a for a, b in zip(frac[1:], frac[2:]))
    assert frac[2] < 0.05


def test_moment_growth_of_critical_points(bf2):
    res = clt_lab.moment_growth(bf2, "N_c", (1,), (2, 4), trials=3, seed=0)
    assert res["fits"][1]["slope"] == pytest.approx(2, abs=0.5)


def test_unknown_quantity(bf2):
    with pytest.raises(ValueError):
        clt_lab.quantity_samples(bf2, "N_X", 2, 0.25, 1, 0)


def test_zero_count_moments(bf1):
    res = clt_lab.count_zeros_mc(bf1, 2, trials=200, seed=1)
    # E N = 2 / pi zeros on [0, 2] for unit covariance scale
    assert abs(res["first_moment"] - 2 / math.pi) < 3 * res["first_moment_se"]
