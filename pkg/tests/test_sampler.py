import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fieldclt.domain import BoxDomain
from fieldclt.errors import GridMismatch
from fieldclt.kernels import KernelSpec
from fieldclt.sampler import (RADEMACHER_LAW, WhiteNoiseGrid, add_fields, derive_seed,
                              draw_weights, dump_realization, half_space_freeze, load_grid,
                              noise_extent, resample_cubes, sample_field, scale_field)
from fieldclt.topology import ES, count_interior


def test_derive_seed_is_deterministic_and_spreads():
    assert derive_seed(7, 1, 2) == derive_seed(7, 1, 2)
    seeds = {derive_seed(7, i, j) for i in range(30) for j in range(30)}
    assert len(seeds) == 900
    assert derive_seed(7, 1, 2) != derive_seed(7, 2, 1)


@pytest.mark.parametrize("law", ["gaussian", RADEMACHER_LAW])
def test_cell_weights_have_variance_h_to_the_d(law):
    w = draw_weights(np.random.default_rng(0), (200, 200), 0.25, 2, law)
    assert w.mean() == pytest.approx(0.0, abs=5 * 0.0625 / 200)
    assert w.var() == pytest.approx(0.25**2, rel=0.02)


def test_rademacher_weights_are_two_valued():
    w = draw_weights(np.random.default_rng(0), (50,), 0.25, 1, RADEMACHER_LAW)
    assert set(np.unique(w)) == {-0.5, 0.5}


def test_cells_partition_into_unit_cubes(bf2):
    ext = noise_extent(bf2, BoxDomain.cube(2, 2), 0.25)
    grid = WhiteNoiseGrid.zeros(ext, 0.25)
    counts = np.zeros(grid.values.shape, dtype=int)
    for sl in grid.cube_index().values():
        counts[sl] += 1
    assert np.all(counts == 1)


def test_padding_covers_kernel_range(bf2):
    D = BoxDomain.cube(3, 2)
    ext = noise_extent(bf2, D, 0.25)
    assert all(a <= lo - bf2.truncation_radius - 0.25 for a, lo in zip(ext.lower, D.lower))


def test_zero_noise_gives_zero_field(bf2):
    D = BoxDomain.cube(2, 2)
    noise = WhiteNoiseGrid.zeros(noise_extent(bf2, D, 0.25), 0.25)
    real = sample_field(bf2, D, 0.25, noise=noise)
    assert all(np.all(a == 0) for a in real.arrays.values())


def test_reproducible(bf2):
    D = BoxDomain.cube(2, 2)
    a = sample_field(bf2, D, 0.25, seed=5)
    b = sample_field(bf2, D, 0.25, seed=5)
    assert all(np.array_equal(a.arrays[k], b.arrays[k]) for k in a.arrays)


def test_grid_matches_exact_evaluator(bf2):
    real = sample_field(bf2, BoxDomain.cube(2, 2), 0.25, seed=3)
    pts = real.grid_points().reshape(-1, 2)
    for alpha in [(0, 0), (1, 0), (1, 1), (0, 2)]:
        exact = real.evaluate(pts, [alpha])[:, 0]
        assert np.allclose(exact, real[alpha].ravel(), atol=1e-10)


def test_derivative_arrays_are_jointly_consistent(bf2):
    h = 1 / 16
    real = sample_field(bf2, BoxDomain.cube(2, 2), h, seed=11)
    f = real.values
    fd = (f[2:, 1:-1] - f[:-2, 1:-1]) / (2 * h)
    assert np.max(np.abs(fd - real[(1, 0)][1:-1, 1:-1])) < 5 * h * h


def test_one_point_variance_and_neighbour_correlation(bf2):
    # Monte Carlo against K(0) = 1 and K((1,0)) = exp(-1/2)
    D = BoxDomain((0, 0), (1, 1))
    n = 1500
    a = np.empty(n)
    b = np.empty(n)
    for i in range(n):
        real = sample_field(bf2, D, 0.25, seed=derive_seed(99, i), max_order=0)
        a[i], b[i] = real.values[0, 0], real.values[-1, 0]
    var_se = math.sqrt(2 / n)
    assert abs(a.var(ddof=1) - 1) < 5 * var_se
    r = np.corrcoef(a, b)[0, 1]
    rho = math.exp(-0.5)
    assert abs(r - rho) < 5 * (1 - rho**2) / math.sqrt(n)


def test_resample_nothing_is_identity(bf2):
    real = sample_field(bf2, BoxDomain.cube(3, 2), 0.25, seed=1)
    new, p = resample_cubes(real, [], 17)
    assert all(np.array_equal(new.arrays[k], real.arrays[k]) for k in real.arrays)
    assert all(np.all(v == 0) for v in p.arrays.values())


def test_resample_perturbation_vanishes_beyond_range(bf2):
    real = sample_field(bf2, BoxDomain.cube(8, 2), 0.25, seed=2, max_order=0)
    new, p = resample_cubes(real, [(0, 0)], 17)
    pts = real.grid_points()
    # distance from each grid point to the closed cube [0,1]^2
    gap = np.linalg.norm(np.maximum(0, np.maximum(-pts, pts - 1)), axis=-1)
    far = gap > bf2.truncation_radius + 0.25
    assert far.any()
    assert np.all(p.values[far] == 0)
    assert np.allclose(new.values, real.values + p.values, atol=1e-12)


def test_resampled_count_difference_has_mean_zero(bf2):
    D = BoxDomain.cube(4, 2)
    diffs = []
    for i in range(150):
        real = sample_field(bf2, D, 0.25, seed=derive_seed(5, i), max_order=0)
        alt = resample_cubes(real, [(0, 0)], derive_seed(6, i), return_perturbation=False)
        diffs.append(count_interior(real, None, 0.0, ES) - count_interior(alt, None, 0.0, ES))
    diffs = np.asarray(diffs, dtype=float)
    se = diffs.std(ddof=1) / math.sqrt(diffs.size)
    assert abs(diffs.mean()) <= 3 * se + 1e-12


def test_half_space_freeze_one_dimensional():
    frozen, free = half_space_freeze([(v,) for v in range(-2, 3)], (0,))
    assert frozen == [(-2,), (-1,), (0,)]
    assert free == [(1,), (2,)]


def test_half_space_freeze_lexicographic():
    frozen, free = half_space_freeze([(-3, 7), (0, 1), (1, -9), (0, 0)], (0, 0))
    assert (-3, 7) in frozen and (0, 0) in frozen
    assert (0, 1) in free and (1, -9) in free


@given(st.lists(st.tuples(st.integers(-5, 5), st.integers(-5, 5)), unique=True, max_size=30),
       st.tuples(st.integers(-5, 5), st.integers(-5, 5)))
def test_half_space_freeze_partitions(cubes, pivot):
    frozen, free = half_space_freeze(cubes, pivot)
    assert sorted(frozen + free) == sorted(cubes)
    assert all(v <= pivot for v in frozen) and all(v > pivot for v in free)


def test_freezing_everything_gives_identical_inner_draws(bf2):
    from fieldclt.sampler import redraw_free
    real = sample_field(bf2, BoxDomain.cube(2, 2), 0.25, seed=4, max_order=0)
    mask = np.zeros(real.noise.values.shape, dtype=bool)
    a = sample_field(bf2, real.domain, 0.25, noise=redraw_free(real.noise, mask, 1), max_order=0)
    b = sample_field(bf2, real.domain, 0.25, noise=redraw_free(real.noise, mask, 2), max_order=0)
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(a.values, real.values)


def test_field_arithmetic(bf2):
    D = BoxDomain.cube(2, 2)
    a = sample_field(bf2, D, 0.25, seed=1)
    b = sample_field(bf2, D, 0.25, seed=2)
    c = add_fields(a, scale_field(b, 0.5))
    pts = np.array([[0.13, -0.71]])
    want = a.evaluate(pts) + 0.5 * b.evaluate(pts)
    assert np.allclose(c.evaluate(pts), want)
    with pytest.raises(GridMismatch):
        add_fields(a, sample_field(bf2, BoxDomain.cube(1, 2), 0.25, seed=2))


def test_grid_dump_roundtrip(tmp_path, bf2):
    real = sample_field(bf2, BoxDomain.cube(2, 2), 0.25, seed=8, max_order=1)
    path = tmp_path / "f.bin"
    dump_realization(real, path)
    header, arrays = load_grid(path)
    assert header["d"] == 2 and header["h"] == 0.25 and header["R"] == 2
    assert header["seed"] == 8
    for a, v in real.arrays.items():
        assert np.array_equal(arrays[a], v)
