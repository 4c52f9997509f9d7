import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from fieldclt import kac_rice as kr
from fieldclt.errors import NonSymmetricInput, OutsideRegionD, SingularConditioningBlock
from fieldclt.kernels import CovarianceOracle, Functional, KernelSpec, gradient_functionals
from fieldclt.sampler import constant_function


# -- determinants of covariances ---------------------------------------------

def test_dc_identity_matrix():
    for m in (1, 3, 6):
        assert kr.dc(np.eye(m)) == pytest.approx(1.0)


def test_dc_duplicated_coordinate(oracle2):
    f = Functional.point((0.2, 0.1), (1, 0))
    C = oracle2.matrix([f, f, Functional.point((0.0, 0.0), (0, 1))])
    assert abs(kr.dc(C)) < 1e-12


def test_dc_rejects_asymmetric():
    with pytest.raises(NonSymmetricInput):
        kr.dc(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_dc_extended_precision_matrix():
    M = mpmath.matrix([[2, 1], [1, 2]])
    assert kr.dc(M) == 3


def test_dc_identity_checks_pass():
    res = kr.dc_identity_checks(instances=200, seed=4)
    assert max(res["worst_relative_error"].values()) < 1e-9


@given(st.integers(0, 2**32 - 1))
def test_dc_scales_with_det_squared(seed):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((3, 5))
    C = B @ B.T
    A = rng.standard_normal((3, 3)) + 3 * np.eye(3)
    assert kr.dc(A @ C @ A.T) == pytest.approx(np.linalg.det(A) ** 2 * kr.dc(C), rel=1e-9)


# -- conditioning ---------------------------------------------------------------

def test_condition_on_independent_block_changes_nothing():
    cov = np.array([[2.0, 0.0, 0.0], [0.0, 1.0, 0.3], [0.0, 0.3, 1.5]])
    model = kr.GaussianVectorModel(list("abc"), np.array([0.0, 1.0, -1.0]), cov)
    cond = kr.condition(model, [0], [1.7])
    assert np.allclose(cond.mean, [1.0, -1.0])
    assert np.allclose(cond.cov, cov[1:, 1:])


@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_conditioning_reduces_variance(seed, k):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((5, 7))
    model = kr.GaussianVectorModel(list(range(5)), np.zeros(5), B @ B.T)
    cond = kr.condition(model, list(range(k)), rng.standard_normal(k))
    assert np.all(np.diag(cond.cov) <= np.diag(model.cov)[k:] + 1e-10)
    assert np.linalg.eigvalsh(cond.cov)[0] > -1e-10


def test_value_conditioned_at_origin(oracle1):
    # Var[f(1) | f(0) = 0] = 1 - K(1)^2 = 1 - exp(-1)
    fns = [Functional.point((0.0,), (0,)), Functional.point((1.0,), (0,))]
    model = kr.GaussianVectorModel.from_oracle(oracle1, fns)
    cond = kr.condition(model, [0], [0.0])
    assert cond.cov[0, 0] == pytest.approx(1 - math.exp(-1), rel=1e-12)
    # the same by simulation: regress f(1) on f(0)
    draws = model.sample(200_000, np.random.default_rng(1))
    resid = draws[:, 1] - math.exp(-0.5) * draws[:, 0]
    assert resid.var() == pytest.approx(1 - math.exp(-1), rel=0.02)


def test_conditioning_extended_path_matches_float(oracle2):
    fns = gradient_functionals((0.3, 0.2)) + gradient_functionals((0.0, 0.0))
    a = kr.GaussianVectorModel.from_oracle(oracle2, fns)
    b = kr.GaussianVectorModel.from_oracle(oracle2, fns, extended=True)
    ca = kr.condition(a, [0, 1], [0.1, -0.2])
    cb = kr.condition(b, [0, 1], [0.1, -0.2])
    assert np.allclose(ca.cov, cb.cov, atol=1e-12)
    assert np.allclose(ca.mean, cb.mean, atol=1e-12)


def test_singular_block_is_reported(oracle2):
    f = Functional.point((0.0, 0.0), (1, 0))
    model = kr.GaussianVectorModel.from_oracle(oracle2, [f, f, Functional.point((0.0, 0.0), (0, 1))])
    with pytest.raises(SingularConditioningBlock):
        kr.condition(model, [0, 1], [0.0, 0.0])


# -- intensities -------------------------------------------------------------------

def test_one_point_intensity_one_dimension(oracle1):
    # sqrt(-K''''(0) / -K''(0)) / pi = sqrt(3) / pi
    assert kr.one_point_intensity(oracle1).J == pytest.approx(math.sqrt(3) / math.pi, rel=1e-12)


def test_one_point_intensity_two_dimensions(oracle2):
    res = kr.one_point_intensity(oracle2, mc_samples=200_000, seed=3)
    want = kr.critical_density_isotropic_2d()
    assert abs(res.J - want) < 4 * res.J_se


def test_one_point_intensity_far_above_the_field(oracle1):
    # gradient of f + p does not care about constant p
    a = kr.one_point_intensity(oracle1).J
    b = kr.one_point_intensity(oracle1, p=constant_function(5.0)).J
    assert b == pytest.approx(a)


def test_three_point_intensity_one_dimension(oracle1):
    res = kr.three_point_intensity(oracle1, 0.3, -0.5, mc_samples=100_000, seed=1)
    assert res.J > 0 and math.isfinite(res.J)
    assert res.J_se / res.J < 0.05


def test_three_point_outside_region(oracle1):
    with pytest.raises(OutsideRegionD):
        kr.three_point_intensity(oracle1, 0.3, 0.5)


def test_three_point_reflection_symmetry(oracle2):
    x, y = np.array([-0.2, 0.3]), np.array([0.5, 0.0])
    a = kr.three_point_intensity(oracle2, x, y, mc_samples=100_000, seed=2)
    b = kr.three_point_intensity(oracle2, -x, -y, mc_samples=100_000, seed=7)
    assert abs(a.J - b.J) < 4 * math.hypot(a.J_se, b.J_se)


@given(st.permutations([0, 1, 2]), st.floats(-3, 3), st.floats(-3, 3))
def test_canonical_triple_is_in_region(order, sx, sy):
    pts = [np.array([0.0, 0.0]), np.array([0.31, 0.05]), np.array([-0.2, 0.47])]
    shift = np.array([sx, sy])
    x, y, z = kr.canonicalize(*[pts[i] + shift for i in order])
    g = kr.geometry(x, y)
    assert g["abs_x"] <= g["abs_y"] <= g["abs_x_minus_y"]
    # the translation maps the set of three points onto {0, x, y}
    got = sorted(map(tuple, np.round([z, z + x, z + y], 9)))
    want = sorted(map(tuple, np.round([p + shift for p in pts], 9)))
    assert got == want


def test_region_grid(oracle2):
    grid = kr.region_D_grid(2)
    assert len(grid) >= 200
    assert all(kr.in_region_D(x, y) for x, y in grid)


# -- covariance-determinant lower bounds ---------------------------------------------

def test_gradient_triple_dc_positive_inside_region(oracle2):
    assert kr.gradient_triple_dc(oracle2, [-0.2, 0.3], [0.5, 0.0]) > 0


def test_one_dimensional_ray_ratio_bounded_below(oracle1):
    # DC(f'(0), f'(t), f'(-2t)) / (t^2 (2t)^4) along t -> 0
    ratios = []
    for t in (1e-1, 1e-2, 1e-3):
        dc = kr.gradient_triple_dc(oracle1, [t], [-2 * t], dps=80)
        ratios.append(float(dc) / (t**2 * (2 * t) ** 4))
    assert min(ratios) > 0
    assert max(ratios) / min(ratios) < 2


def test_ray_exponents(oracle2):
    collinear = kr.ray_exponent(oracle2, math.pi)
    right = kr.ray_exponent(oracle2, math.pi / 2)
    assert collinear["exponent"] == pytest.approx(12, abs=0.2)
    assert right["exponent"] == pytest.approx(10, abs=0.2)


def test_one_dimensional_ray_exponent(oracle1):
    assert kr.ray_exponent(oracle1, math.pi)["exponent"] == pytest.approx(6, abs=0.2)


def test_lower_bound_check_default_grid(oracle2):
    res = kr.dc_lower_bound_check(oracle2, kr.region_D_grid(2)[::8])
    assert res["passed"] and res["min_ratio"] > 0


def test_conditional_hessian_variance_shrinks_quadratically(oracle2):
    ts = np.array([0.02, 0.04, 0.08])
    v = [kr.conditional_hessian_variance(oracle2, [-t * 0.6, t * 0.8], [2 * t, 0.0]).min()
         for t in ts]
    slope = np.polyfit(np.log(ts), np.log(v), 1)[0]
    assert slope == pytest.approx(2, abs=0.3)


# -- non-degeneracy ----------------------------------------------------------------

def test_nondegeneracy_suite(oracle2):
    res = kr.nondegeneracy_suite(oracle2, probes=15, seed=1)
    assert res["passed"]
    assert len(res["vectors"]) == 4


def test_duplicated_probe_is_singular(oracle2):
    x = np.array([0.4, 0.1])
    e = np.eye(2)
    fns = kr.nondegeneracy_vectors(2, x, x, e[0], e[1])["gradients_at_three_points"]
    assert kr.min_eigenvalue(oracle2, fns) <= 1e-12


def test_parallel_directions_are_degenerate():
    # the suite skips probes with v parallel to w because the mixed third
    # derivatives then coincide
    oracle = CovarianceOracle(KernelSpec.bargmann_fock(2))
    v = np.array([1.0, 0.0])
    fns = kr.nondegeneracy_vectors(2, np.array([0.3, 0.0]), np.array([0.0, 0.5]), v, v)
    assert kr.min_eigenvalue(oracle, fns["hessian_and_mixed_third"]) <= 1e-12


# -- one-dimensional zeros ------------------------------------------------------------

def test_divided_difference_factorisation(oracle1):
    res = kr.divided_difference_checks(oracle1)
    assert max(res["factorisation_relative_error"]) < 1e-9
    assert res["limit_gap"][0] < 1e-3
    assert res["convergence_rate"] >= 0.9


def test_zero_intensity_matches_rice_formula():
    # one-point zero density sqrt(-K''(0)) / pi for a unit-variance field
    assert kr.zeros_one_point_intensity(1.0, 0.3) == pytest.approx(1 / math.pi, rel=1e-10)


def test_zeros_far_below_a_large_shift():
    q = kr.zeros_second_moment_quadrature(1.0, 4.0, constant_function(6.0))
    assert q["second_moment"] < 0.01


def test_zeros_quadrature_against_simulation(oracle1):
    res = kr.zeros_1d_second_moment(oracle1, 2.0, trials=1500, seed=3)
    assert abs(res["z_score"]) < 3
