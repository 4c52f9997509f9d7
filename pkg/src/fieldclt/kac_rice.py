"""Gaussian linear algebra for Kac-Rice intensities of critical points and zeros.

Covariances come from a CovarianceOracle.  Near the diagonal the covariance
determinant (``dc``) drops below double precision, so matrices there are built
and conditioned in mpmath before being handed to Monte Carlo in float64.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import mpmath
import numpy as np
from scipy import integrate, special

from .errors import (NonSymmetricInput, OutsideRegionD, SingularConditioningBlock,
                     UnsupportedDimension)
from .kernels import (CovarianceOracle, Functional, gradient_functionals,
                      hessian_functionals)

SYMMETRY_TOL = 1e-12
SINGULAR_TOL = 1e-12
MIN_APPROACH = 1e-2          # closest |x| for three-point intensities
EXTENDED_BELOW = 5e-2        # switch to extended precision below this separation
DEFAULT_DPS = 60


# ---------------------------------------------------------------------------
# DC and conditioning

def _as_matrix(obj):
    if isinstance(obj, GaussianVectorModel):
        return obj.cov_mp if obj.cov_mp is not None else obj.cov
    return obj


def dc(obj, tol: float = SYMMETRY_TOL):
    """Determinant of a covariance matrix (or of a model's covariance).

    mpmath matrices are handled in their own precision.
    """
    M = _as_matrix(obj)
    if isinstance(M, mpmath.matrix):
        if M.rows != M.cols:
            raise NonSymmetricInput("covariance must be square")
        scale = max(abs(M[i, j]) for i in range(M.rows) for j in range(M.cols)) or 1
        for i in range(M.rows):
            for j in range(i):
                if abs(M[i, j] - M[j, i]) > tol * scale:
                    raise NonSymmetricInput("covariance is not symmetric")
        return mpmath.det(M)
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NonSymmetricInput("covariance must be square")
    scale = np.max(np.abs(M)) if M.size else 1.0
    if np.max(np.abs(M - M.T), initial=0.0) > tol * max(scale, 1e-300):
        raise NonSymmetricInput("covariance is not symmetric")
    return float(np.linalg.det(M))


def _psd_sqrt(C: np.ndarray) -> np.ndarray:
    C = 0.5 * (C + C.T)
    w, V = np.linalg.eigh(C)
    return V * np.sqrt(np.clip(w, 0.0, None))


@dataclass
class GaussianVectorModel:
    """Finite Gaussian vector described by linear functionals of the field."""

    descriptors: list
    mean: np.ndarray
    cov: np.ndarray
    cov_mp: mpmath.matrix | None = field(default=None, repr=False)
    mean_mp: list | None = field(default=None, repr=False)

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.cov = np.asarray(self.cov, dtype=float)
        n = len(self.mean)
        if self.cov.shape != (n, n):
            raise ValueError("mean and covariance sizes differ")

    @classmethod
    def from_oracle(cls, oracle: CovarianceOracle, functionals: Sequence[Functional],
                    mean=None, extended: bool = False, dps: int = DEFAULT_DPS):
        functionals = list(functionals)
        n = len(functionals)
        mean = np.zeros(n) if mean is None else np.asarray(mean, dtype=float)
        if extended:
            M = oracle.matrix_mp(functionals, dps=dps)
            with mpmath.workdps(dps):
                cov = np.array([[float(M[i, j]) for j in range(n)] for i in range(n)])
                mean_mp = [mpmath.mpf(float(m)) for m in mean]
            return cls(functionals, mean, cov, M, mean_mp)
        return cls(functionals, mean, oracle.matrix(functionals))

    @property
    def dimension(self) -> int:
        return len(self.mean)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.cov + self.cov.T))[0])

    def density_at(self, value, dps: int = DEFAULT_DPS) -> float:
        """Gaussian density of the vector at a point (uses extended precision if present)."""
        if self.cov_mp is not None:
            with mpmath.workdps(dps):
                v = mpmath.matrix([mpmath.mpf(float(a)) - b for a, b in zip(value, self.mean_mp)])
                det = mpmath.det(self.cov_mp)
                if det <= 0:
                    raise SingularConditioningBlock("covariance is singular")
                quad = (v.T * mpmath.lu_solve(self.cov_mp, v))[0]
                n = self.dimension
                return float((2 * mpmath.pi) ** (-mpmath.mpf(n) / 2) * det ** -0.5
                             * mpmath.exp(-quad / 2))
        v = np.asarray(value, dtype=float) - self.mean
        sign, logdet = np.linalg.slogdet(self.cov)
        if sign <= 0:
            raise SingularConditioningBlock("covariance is singular")
        quad = v @ np.linalg.solve(self.cov, v)
        return float(math.exp(-0.5 * (len(v) * math.log(2 * math.pi) + logdet + quad)))

    def sample(self, n: int, rng: np.random.Generator, antithetic: bool = False) -> np.ndarray:
        L = _psd_sqrt(self.cov)
        z = rng.standard_normal((n, self.dimension))
        if antithetic:
            return np.concatenate([self.mean + z @ L.T, self.mean - z @ L.T])
        return self.mean + z @ L.T


def condition(model: GaussianVectorModel, observed: Sequence[int], values,
              dps: int = DEFAULT_DPS) -> GaussianVectorModel:
    """Law of the unobserved coordinates given the observed ones."""
    obs = list(observed)
    rest = [i for i in range(model.dimension) if i not in obs]
    values = np.asarray(values, dtype=float)
    if model.cov_mp is not None:
        return _condition_mp(model, obs, rest, values, dps)
    S11 = model.cov[np.ix_(obs, obs)]
    S21 = model.cov[np.ix_(rest, obs)]
    S22 = model.cov[np.ix_(rest, rest)]
    scale = max(np.max(np.abs(S11)), 1e-300)
    w = np.linalg.eigvalsh(S11)
    if w[0] <= SINGULAR_TOL * scale:
        raise SingularConditioningBlock(f"observed block has eigenvalue {w[0]:.3e}")
    G = np.linalg.solve(S11, S21.T).T
    mean = model.mean[rest] + G @ (values - model.mean[obs])
    cov = S22 - G @ S21.T
    cov = 0.5 * (cov + cov.T)
    return GaussianVectorModel([model.descriptors[i] for i in rest], mean, cov)


def _condition_mp(model, obs, rest, values, dps):
    with mpmath.workdps(dps):
        M = model.cov_mp
        S11 = mpmath.matrix([[M[i, j] for j in obs] for i in obs])
        S21 = mpmath.matrix([[M[i, j] for j in obs] for i in rest])
        S22 = mpmath.matrix([[M[i, j] for j in rest] for i in rest])
        scale = max(abs(S11[i, j]) for i in range(len(obs)) for j in range(len(obs)))
        ev = mpmath.eigsy(S11)[0]
        lam = min(ev[i] for i in range(len(obs)))
        if lam <= mpmath.mpf(10) ** (-(dps - 10)) * scale:
            raise SingularConditioningBlock(f"observed block has eigenvalue {float(lam):.3e}")
        mu = model.mean_mp
        resid = mpmath.matrix([mpmath.mpf(float(values[k])) - mu[i] for k, i in enumerate(obs)])
        X = mpmath.lu_solve(S11, resid)
        G = S21 * mpmath.inverse(S11)
        cmean = [mu[i] + (S21[r, :] * X)[0] for r, i in enumerate(rest)]
        C = S22 - G * S21.T
        n = len(rest)
        cov = np.array([[float((C[a, b] + C[b, a]) / 2) for b in range(n)] for a in range(n)])
        out = GaussianVectorModel([model.descriptors[i] for i in rest],
                                  np.array([float(m) for m in cmean]), cov)
        out.cov_mp = C
        out.mean_mp = cmean
        return out


# ---------------------------------------------------------------------------
# deterministic perturbations p

PFunc = Callable[[np.ndarray, tuple], np.ndarray]


def _p_values(p: PFunc | None, functionals: Sequence[Functional]) -> np.ndarray:
    if p is None:
        return np.zeros(len(functionals))
    out = np.zeros(len(functionals))
    for k, fn in enumerate(functionals):
        for c, x, a in fn.terms:
            out[k] += c * float(np.asarray(p(np.asarray([x], dtype=float), a)).reshape(-1)[0])
    return out


# ---------------------------------------------------------------------------
# intensities

@dataclass
class IntensityResult:
    points: tuple
    density_factor: float
    det_factor: float
    det_se: float
    J: float
    J_se: float
    samples: int
    geometry: dict = field(default_factory=dict)


def _mc_abs_det_product(model: GaussianVectorModel, d: int, n_points: int, rng,
                        rel_tol: float = 0.05, batch: int = 20000, max_samples: int = 400000,
                        min_samples: int = 0):
    """E|prod det H_k| over the Gaussian law of stacked upper-triangle Hessians.

    Antithetic pairs (mean +/- Lz) are averaged into one draw; sampling stops
    once SE/mean < rel_tol (after at least min_samples pairs) or at the cap.
    """
    L = _psd_sqrt(model.cov)
    tri = d * (d + 1) // 2
    iu = np.triu_indices(d)
    vals = []
    total = 0
    while True:
        z = rng.standard_normal((batch, model.dimension)) @ L.T
        pair = []
        for sign in (1.0, -1.0):
            X = model.mean + sign * z
            prod = np.ones(batch)
            for k in range(n_points):
                H = np.zeros((batch, d, d))
                H[:, iu[0], iu[1]] = X[:, k * tri:(k + 1) * tri]
                H[:, iu[1], iu[0]] = X[:, k * tri:(k + 1) * tri]
                prod *= np.abs(np.linalg.det(H)) if d > 1 else np.abs(H[:, 0, 0])
            pair.append(prod)
        vals.append(0.5 * (pair[0] + pair[1]))
        total += batch
        allv = np.concatenate(vals)
        mean = float(allv.mean())
        se = float(allv.std(ddof=1) / math.sqrt(allv.size))
        if total >= max_samples or (total >= min_samples and mean > 0 and se / mean < rel_tol):
            return mean, se, 2 * total


def one_point_intensity(oracle: CovarianceOracle, x=None, p: PFunc | None = None,
                        mc_samples: int = 200000, seed: int = 0, rel_tol: float = 0.01,
                        closed_form: bool = True) -> IntensityResult:
    """Critical points per unit volume at x: p_grad(0) * E[|det H| | grad F = 0]."""
    d = oracle.dimension
    x = np.zeros(d) if x is None else np.atleast_1d(np.asarray(x, dtype=float))
    grads = gradient_functionals(x)
    hess = hessian_functionals(x)
    fns = grads + hess
    mean = -_p_values(p, grads)  # f-gradient must equal -grad p
    full = GaussianVectorModel.from_oracle(oracle, fns, mean=np.concatenate(
        [np.zeros(d), _p_values(p, hess)]))
    obs = list(range(d))
    phi = GaussianVectorModel(grads, np.zeros(d), full.cov[:d, :d]).density_at(mean)
    cond = condition(full, obs, mean)
    if closed_form and d == 1:
        m, s = cond.mean[0], math.sqrt(max(cond.cov[0, 0], 0.0))
        e = _abs_normal_mean(m, s)
        return IntensityResult((tuple(x),), phi, e, 0.0, phi * e, 0.0, 0)
    rng = np.random.default_rng(seed)
    e, se, n = _mc_abs_det_product(cond, d, 1, rng, rel_tol=rel_tol, max_samples=mc_samples,
                                   min_samples=mc_samples // 4)
    return IntensityResult((tuple(x),), phi, e, se, phi * e, phi * se, n)


def _abs_normal_mean(m, s):
    """E|Y| for Y ~ N(m, s^2)."""
    if s <= 0:
        return abs(m)
    return s * math.sqrt(2 / math.pi) * math.exp(-m * m / (2 * s * s)) + m * (1 - 2 * special.ndtr(-m / s))


def critical_density_isotropic_2d(scale: float = 1.0) -> float:
    """Closed form 2 / (sqrt(3) pi s^2) for the isotropic Gaussian covariance in d = 2."""
    return 2.0 / (math.sqrt(3.0) * math.pi * scale ** 2)


def expected_critical_count(oracle: CovarianceOracle, R: float, **kw) -> tuple[float, float]:
    """(2R)^d times the one-point intensity, with its standard error."""
    res = one_point_intensity(oracle, **kw)
    vol = (2 * R) ** oracle.dimension
    return vol * res.J, vol * res.J_se


def geometry(x, y) -> dict:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    nx, ny = float(np.linalg.norm(x)), float(np.linalg.norm(y))
    if len(x) == 1:
        theta = math.pi
    else:
        c = float(np.dot(x, y) / (nx * ny)) if nx > 0 and ny > 0 else 1.0
        theta = math.acos(max(-1.0, min(1.0, c)))
    return {"abs_x": nx, "abs_y": ny, "abs_x_minus_y": float(np.linalg.norm(x - y)),
            "theta": theta}


def in_region_D(x, y, tol: float = 0.0) -> bool:
    """0 < |x| < |y| < |x - y| <= 1."""
    g = geometry(x, y)
    return (0 < g["abs_x"] < g["abs_y"] + tol and g["abs_y"] < g["abs_x_minus_y"] + tol
            and g["abs_x_minus_y"] <= 1 + tol)


def canonicalize(a, b, c):
    """Reorder and translate a triple so that (x, y) lies in the region D.

    The vertex opposite the longest side goes to the origin; x is the closer
    of the two others.  Returns (x, y, z) with z the translation used.
    """
    pts = [np.atleast_1d(np.asarray(v, dtype=float)) for v in (a, b, c)]
    best = None
    for i, j, k in itertools.permutations(range(3)):
        x, y = pts[i] - pts[k], pts[j] - pts[k]
        nx, ny, nxy = np.linalg.norm(x), np.linalg.norm(y), np.linalg.norm(x - y)
        if nx <= ny <= nxy:
            key = (nxy, ny, nx)
            if best is None or key > best[0]:
                best = (key, x, y, pts[k])
    return best[1], best[2], best[3]


def points_model(oracle: CovarianceOracle, points, p: PFunc | None = None,
                 extended: bool | None = None, dps: int = DEFAULT_DPS):
    """Gradient-and-Hessian vector at the points and its law given zero gradients of F."""
    pts = [np.atleast_1d(np.asarray(v, dtype=float)) for v in points]
    grads = [g for x in pts for g in gradient_functionals(x)]
    hess = [hf for x in pts for hf in hessian_functionals(x)]
    if extended is None:
        sep = min(np.linalg.norm(a - b) for a, b in itertools.combinations(pts, 2))
        extended = sep < EXTENDED_BELOW
    gmean = _p_values(p, grads)
    hmean = _p_values(p, hess)
    model = GaussianVectorModel.from_oracle(oracle, grads + hess,
                                            mean=np.concatenate([gmean, hmean]),
                                            extended=extended, dps=dps)
    ng = len(grads)
    grad_model = GaussianVectorModel(grads, gmean, model.cov[:ng, :ng])
    if model.cov_mp is not None:
        with mpmath.workdps(dps):
            grad_model.cov_mp = mpmath.matrix([[model.cov_mp[i, j] for j in range(ng)]
                                               for i in range(ng)])
            grad_model.mean_mp = model.mean_mp[:ng]
    return model, grad_model


def multi_point_intensity(oracle: CovarianceOracle, points, p: PFunc | None = None,
                          mc_samples: int = 100000, seed: int = 0, rel_tol: float = 0.05,
                          extended: bool | None = None,
                          dps: int = DEFAULT_DPS) -> IntensityResult:
    """Critical-point intensity at distinct points: phi(0) * E[prod |det H| | grads = 0]."""
    d = oracle.dimension
    n_pts = len(points)
    model, grad_model = points_model(oracle, points, p, extended, dps)
    ng = n_pts * d
    # F-gradients vanish iff the f-gradients equal -grad p; shift the mean instead
    zero = np.zeros(ng)
    shifted = GaussianVectorModel(grad_model.descriptors, -grad_model.mean, grad_model.cov,
                                  grad_model.cov_mp,
                                  [-m for m in grad_model.mean_mp] if grad_model.mean_mp else None)
    phi = shifted.density_at(zero, dps)
    full = GaussianVectorModel(model.descriptors,
                               np.concatenate([np.zeros(ng), model.mean[ng:]]), model.cov,
                               model.cov_mp,
                               None if model.mean_mp is None else
                               [mpmath.mpf(0)] * ng + list(model.mean_mp[ng:]))
    cond = condition(full, list(range(ng)), -grad_model.mean, dps)
    rng = np.random.default_rng(seed)
    e, se, n = _mc_abs_det_product(cond, d, n_pts, rng, rel_tol=rel_tol, max_samples=mc_samples)
    return IntensityResult(tuple(tuple(np.atleast_1d(v)) for v in points), phi, e, se,
                           phi * e, phi * se, n)


def triple_intensity(oracle: CovarianceOracle, points, p: PFunc | None = None, **kw) -> IntensityResult:
    """Three-point intensity J at three distinct points in any order."""
    if len(points) != 3:
        raise ValueError("need exactly three points")
    return multi_point_intensity(oracle, points, p, **kw)


def two_point_intensity(oracle: CovarianceOracle, x, y=None, p: PFunc | None = None,
                        **kw) -> IntensityResult:
    """Two-point intensity of critical points at (x, y), y defaulting to the origin."""
    d = oracle.dimension
    y = np.zeros(d) if y is None else y
    res = multi_point_intensity(oracle, [np.atleast_1d(x), np.atleast_1d(y)], p, **kw)
    res.geometry = {"distance": float(np.linalg.norm(np.atleast_1d(x) - np.atleast_1d(y)))}
    return res


def three_point_intensity(oracle: CovarianceOracle, x, y, p: PFunc | None = None,
                          mc_samples: int = 100000, seed: int = 0, rel_tol: float = 0.05,
                          min_approach: float = MIN_APPROACH) -> IntensityResult:
    """J(x, y, 0) for (x, y) in the region D."""
    if not in_region_D(x, y):
        raise OutsideRegionD(f"({x}, {y}) violates 0 < |x| < |y| < |x-y| <= 1")
    geo = geometry(x, y)
    if geo["abs_x"] < min_approach:
        raise SingularConditioningBlock(f"|x| = {geo['abs_x']:.2e} is below the closest approach")
    d = oracle.dimension
    res = multi_point_intensity(oracle, [np.atleast_1d(x), np.atleast_1d(y), np.zeros(d)], p,
                                mc_samples, seed, rel_tol)
    res.geometry = geo
    return res


def prop_bound_weight(geo: dict, d: int) -> float:
    """|x|^(d-1) |y|^(d-1) (|y| + sin t)^(d-1) / (sqrt|y| + sin t)."""
    s = math.sin(geo["theta"])
    ax, ay = geo["abs_x"], geo["abs_y"]
    return ax ** (d - 1) * ay ** (d - 1) * (ay + s) ** (d - 1) / (math.sqrt(ay) + s)


def region_D_grid(d: int, min_x: float = 2e-2, spacing: str = "uniform",
                  n_scales: int = 10) -> list[tuple[np.ndarray, np.ndarray]]:
    """Deterministic configurations (x, y) in D over scale, shape and angle.

    ``uniform`` spaces |y| evenly over (0, 1); ``log`` spaces it geometrically,
    which concentrates the grid near the diagonal.
    """
    if spacing == "uniform":
        ys = np.linspace(0.05, 0.95, n_scales)
    elif spacing == "log":
        ys = np.geomspace(min_x * 1.2, 0.95, n_scales)
    else:
        raise ValueError(f"unknown spacing {spacing!r}")
    ratios = (0.2, 0.4, 0.6, 0.8, 0.95)
    out = []
    for ay in ys:
        for ratio in ratios:
            ax = ratio * ay
            if d == 1:
                cands = [(np.array([ax]), np.array([-ay]))]
            else:
                # |x - y| > |y| needs cos(theta) < |x| / (2|y|)
                lo = max(math.acos(min(1.0, ratio / 2)) + 1e-3, math.pi / 3)
                cands = []
                for theta in np.linspace(lo, math.pi, 6):
                    x = np.zeros(d)
                    y = np.zeros(d)
                    y[0] = ay
                    x[0] = ax * math.cos(theta)
                    x[1] = ax * math.sin(theta)
                    cands.append((x, y))
            out.extend((x, y) for x, y in cands if in_region_D(x, y) and ax >= min_x)
    return out


# ---------------------------------------------------------------------------
# DC lower bound and non-degeneracy

def gradient_triple_dc(oracle: CovarianceOracle, x, y, dps: int = DEFAULT_DPS):
    """DC(grad f(0), grad f(x), grad f(y)) in extended precision (mpf)."""
    d = oracle.dimension
    fns = (gradient_functionals(np.zeros(d)) + gradient_functionals(np.atleast_1d(x))
           + gradient_functionals(np.atleast_1d(y)))
    with mpmath.workdps(dps):
        return mpmath.det(oracle.matrix_mp(fns, dps=dps))


def dc_bound_weight(geo: dict, d: int) -> float:
    s = math.sin(geo["theta"])
    return geo["abs_x"] ** (2 * d) * geo["abs_y"] ** (2 * (d + 1)) * (geo["abs_y"] + s) ** (2 * (d - 1))


def dc_lower_bound_check(oracle: CovarianceOracle, configs=None, dps: int = DEFAULT_DPS,
                         min_approach: float = 1e-3) -> dict:
    """Ratio DC / (|x|^2d |y|^2(d+1) (|y| + sin t)^2(d-1)) over configurations in D."""
    d = oracle.dimension
    if configs is None:
        configs = region_D_grid(d, min_x=min_approach)
    rows = []
    for x, y in configs:
        geo = geometry(x, y)
        if geo["abs_x"] < min_approach:
            raise OutsideRegionD("configuration closer than the closest approach")
        val = gradient_triple_dc(oracle, x, y, dps)
        ratio = float(val) / dc_bound_weight(geo, d)
        rows.append({**geo, "dc": float(val), "ratio": ratio})
    ratios = np.array([r["ratio"] for r in rows])
    return {"rows": rows, "min_ratio": float(ratios.min()), "max_ratio": float(ratios.max()),
            "spread": float(ratios.max() / ratios.min()) if ratios.min() > 0 else math.inf,
            "passed": bool(ratios.min() > 0 and ratios.max() / ratios.min() < 1e4)}


def ray_configs(d: int, theta: float, y_over_x: float, ts) -> list:
    """Configurations x = t u, y = (y_over_x) t v with angle theta between u and v."""
    out = []
    for t in ts:
        if d == 1:
            out.append((np.array([t]), np.array([-y_over_x * t])))
            continue
        y = np.zeros(d)
        x = np.zeros(d)
        y[0] = y_over_x * t
        x[0] = t * math.cos(theta)
        x[1] = t * math.sin(theta)
        out.append((x, y))
    return out


def ray_exponent(oracle: CovarianceOracle, theta: float, y_over_x: float = 2.0,
                 ts=None, dps: int = DEFAULT_DPS + 40) -> dict:
    """Log-log slope of DC along a ray shrinking towards the origin."""
    d = oracle.dimension
    ts = np.geomspace(1e-3, 1e-1, 9) if ts is None else np.asarray(ts)
    vals = []
    for x, y in ray_configs(d, theta, y_over_x, ts):
        v = gradient_triple_dc(oracle, x, y, dps)
        vals.append(float(mpmath.log(v)))
    slope, intercept = np.polyfit(np.log(ts), vals, 1)
    return {"theta": theta, "y_over_x": y_over_x, "t": ts.tolist(), "log_dc": vals,
            "exponent": float(slope)}


def conditional_hessian_variance(oracle: CovarianceOracle, x, y, dps: int = DEFAULT_DPS) -> np.ndarray:
    """Var of the Hessian entries at 0 given zero gradients at 0, x and y."""
    d = oracle.dimension
    pts = [np.zeros(d), np.atleast_1d(x), np.atleast_1d(y)]
    grads = [g for p in pts for g in gradient_functionals(p)]
    hess = hessian_functionals(np.zeros(d))
    model = GaussianVectorModel.from_oracle(oracle, grads + hess, extended=True, dps=dps)
    cond = condition(model, list(range(len(grads))), np.zeros(len(grads)), dps)
    return np.diag(cond.cov).copy()


def _random_unit(rng, d):
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


def nondegeneracy_vectors(d: int, x, y, v, w) -> dict[str, list[Functional]]:
    """The four Gaussian vectors whose non-degeneracy the counting arguments use."""
    zero = np.zeros(d)
    grad0 = gradient_functionals(zero)
    hess0 = hessian_functionals(zero)
    e = np.eye(d)
    vec1 = grad0 + gradient_functionals(x) + gradient_functionals(y)
    vec2 = grad0 + hess0 + gradient_functionals(x)
    vec3 = (grad0 + [Functional.directional(zero, [v, e[i]]) for i in range(d)]
            + [Functional.directional(zero, [v, v, e[i]]) for i in range(d)])
    vec4 = grad0 + hess0 + [Functional.directional(zero, [v, v, w]),
                            Functional.directional(zero, [v, w, w])]
    return {"gradients_at_three_points": vec1, "gradient_hessian_and_far_gradient": vec2,
            "directional_jets": vec3, "hessian_and_mixed_third": vec4}


def nondegeneracy_suite(oracle: CovarianceOracle, probes: int = 100, seed: int = 0,
                        min_separation: float = 0.1, threshold: float = 1e-8) -> dict:
    """Minimum covariance eigenvalues of the four vectors over random probes."""
    d = oracle.dimension
    rng = np.random.default_rng(seed)
    results: dict[str, list[float]] = {}
    excluded = 0
    for _ in range(probes):
        while True:
            x = rng.uniform(-1, 1, d)
            y = rng.uniform(-1, 1, d)
            if min(np.linalg.norm(x), np.linalg.norm(y), np.linalg.norm(x - y)) >= min_separation:
                break
        v = _random_unit(rng, d)
        w = _random_unit(rng, d)
        if d > 1 and abs(abs(float(v @ w)) - 1) < 1e-3:
            excluded += 1
            continue
        for name, fns in nondegeneracy_vectors(d, x, y, v, w).items():
            if d == 1 and name == "hessian_and_mixed_third":
                continue  # needs two independent directions
            C = oracle.matrix(fns)
            lam = np.linalg.eigvalsh(0.5 * (C + C.T))
            results.setdefault(name, []).append(float(lam[0]))
    summary = {k: {"min_eigenvalue": float(min(v)), "probes": len(v),
                   "all_positive": bool(min(v) > threshold)} for k, v in results.items()}
    return {"vectors": summary, "excluded_probes": excluded,
            "passed": all(s["all_positive"] for s in summary.values())}


def min_eigenvalue(oracle: CovarianceOracle, functionals) -> float:
    C = oracle.matrix(functionals)
    return float(np.linalg.eigvalsh(0.5 * (C + C.T))[0])


# ---------------------------------------------------------------------------
# 1D zeros: divided differences and the second moment

def divided_difference(x: float, y: float) -> Functional:
    """(f(y) - f(x)) / (y - x) as a linear functional."""
    r = y - x
    return Functional(((-1.0 / r, (float(x),), (0,)), (1.0 / r, (float(y),), (0,))), "D")


def dc_pair_values(oracle: CovarianceOracle, x: float, y: float, dps: int = DEFAULT_DPS):
    """(DC(f(x), f(y)), DC(f(x), D_{x,y} f)) in extended precision."""
    fx = Functional.point((x,), (0,))
    fy = Functional.point((y,), (0,))
    with mpmath.workdps(dps):
        a = mpmath.det(oracle.matrix_mp([fx, fy], dps=dps))
        b = mpmath.det(oracle.matrix_mp([fx, divided_difference(x, y)], dps=dps))
    return a, b


def _gauss_cov_1d(s: float):
    """Stable K, K', K'' and divided-difference pieces for exp(-r^2 / (2 s^2))."""
    def K(r):
        return math.exp(-r * r / (2 * s * s))

    def K1(r):
        return -r / (s * s) * K(r)

    def K2(r):
        return (r * r / s ** 4 - 1 / s ** 2) * K(r)

    def one_minus_K(r):
        return -math.expm1(-r * r / (2 * s * s))

    return K, K1, K2, one_minus_K


def _pair_model_1d(kernel_scale: float, x: float, y: float, p: PFunc | None):
    """Mean and covariance of (F(x), D, F'(x), F'(y)) with D the divided difference."""
    K, K1, K2, omk = _gauss_cov_1d(kernel_scale)
    r = y - x
    s2 = kernel_scale ** 2
    var_d = 2 * omk(r) / (r * r)
    cov = np.array([
        [1.0, -omk(r) / r, 0.0, K1(r)],
        [-omk(r) / r, var_d, -K1(r) / r, -K1(r) / r],
        [0.0, -K1(r) / r, 1 / s2, -K2(r)],
        [K1(r), -K1(r) / r, -K2(r), 1 / s2],
    ])
    if p is None:
        mean = np.zeros(4)
    else:
        px = float(np.asarray(p(np.array([[x]]), (0,))).reshape(-1)[0])
        py = float(np.asarray(p(np.array([[y]]), (0,))).reshape(-1)[0])
        dpx = float(np.asarray(p(np.array([[x]]), (1,))).reshape(-1)[0])
        dpy = float(np.asarray(p(np.array([[y]]), (1,))).reshape(-1)[0])
        mean = np.array([px, (py - px) / r, dpx, dpy])
    return mean, cov


def _abs_product_mean(m, C) -> float:
    """E|XY| for a bivariate normal with mean m and covariance C."""
    sx = math.sqrt(max(C[0, 0], 0.0))
    if sx == 0:
        return abs(m[0]) * _abs_normal_mean(m[1], math.sqrt(max(C[1, 1], 0)))
    beta = C[0, 1] / C[0, 0]
    s_res = math.sqrt(max(C[1, 1] - beta * C[0, 1], 0.0))

    def integrand(u):
        xv = m[0] + sx * u
        return abs(xv) * _abs_normal_mean(m[1] + beta * (xv - m[0]), s_res) * math.exp(-u * u / 2)

    kink = -m[0] / sx
    a, _ = integrate.quad(integrand, -np.inf, kink, epsabs=1e-13, epsrel=1e-11, limit=200)
    b, _ = integrate.quad(integrand, kink, np.inf, epsabs=1e-13, epsrel=1e-11, limit=200)
    return (a + b) / math.sqrt(2 * math.pi)


def zeros_two_point_intensity(kernel_scale: float, x: float, y: float,
                              p: PFunc | None = None) -> float:
    """J(x, y) for zeros of F = f + p on the line, stable as y -> x."""
    mean, cov = _pair_model_1d(kernel_scale, x, y, p)
    r = abs(y - x)
    obs = GaussianVectorModel([], mean[:2], cov[:2, :2])
    dens = obs.density_at(np.zeros(2)) / r   # density of (F(x), F(y)) at 0
    cond = condition(GaussianVectorModel([None] * 4, mean, cov), [0, 1], [0.0, 0.0])
    return dens * _abs_product_mean(cond.mean, cond.cov)


def zeros_one_point_intensity(kernel_scale: float, x: float, p: PFunc | None = None) -> float:
    """E[|F'(x)| | F(x) = 0] times the density of F(x) at 0."""
    if p is None:
        m0 = m1 = 0.0
    else:
        m0 = float(np.asarray(p(np.array([[x]]), (0,))).reshape(-1)[0])
        m1 = float(np.asarray(p(np.array([[x]]), (1,))).reshape(-1)[0])
    # F(x) and F'(x) are independent under stationarity
    dens = math.exp(-m0 * m0 / 2) / math.sqrt(2 * math.pi)
    return dens * _abs_normal_mean(m1, 1.0 / kernel_scale)


def zeros_second_moment_quadrature(kernel_scale: float, R: float, p: PFunc | None = None,
                                   tol: float = 1e-8) -> dict:
    """E[N(R)^2] = E[N] + integral of J over [0, R]^2 for zeros in [0, R]."""
    if p is None:
        first = R * zeros_one_point_intensity(kernel_scale, 0.0)

        def g(t):
            return 2.0 * (R - t) * zeros_two_point_intensity(kernel_scale, 0.0, t)

        second, err = integrate.quad(g, 0.0, R, epsabs=tol, epsrel=tol, limit=400)
    else:
        first, _ = integrate.quad(lambda t: zeros_one_point_intensity(kernel_scale, t, p),
                                  0.0, R, epsabs=tol, epsrel=tol, limit=200)

        def inner(xv):
            def fy(yv):
                if yv == xv:
                    return 0.0
                return zeros_two_point_intensity(kernel_scale, xv, yv, p)
            a, _ = integrate.quad(fy, 0.0, xv, epsabs=tol, epsrel=1e-6, limit=100) if xv > 0 else (0.0, 0)
            return 2.0 * a

        second, err = integrate.quad(inner, 0.0, R, epsabs=tol, epsrel=1e-6, limit=100)
    return {"first_moment": first, "factorial_second": second, "second_moment": first + second,
            "quadrature_error": err}


def zeros_1d_second_moment(oracle: CovarianceOracle, R: float, p: PFunc | None = None,
                           trials: int = 0, h: float = 1 / 16, seed: int = 0) -> dict:
    """E[N(R)^2] for zeros of f + p in [0, R] by quadrature and, if trials > 0, by MC."""
    if oracle.dimension != 1:
        raise UnsupportedDimension("zero counting is one-dimensional")
    if not oracle.kernel.is_analytic:
        raise UnsupportedDimension("quadrature needs an analytic Gaussian kernel")
    out = {"R": R, "quadrature": zeros_second_moment_quadrature(oracle.kernel.scale, R, p)}
    if trials:
        from .clt_lab import count_zeros_mc
        out["monte_carlo"] = count_zeros_mc(oracle.kernel, R, p, trials, h, seed)
        mc = out["monte_carlo"]
        diff = mc["second_moment"] - out["quadrature"]["second_moment"]
        out["difference"] = diff
        out["z_score"] = diff / mc["second_moment_se"] if mc["second_moment_se"] > 0 else math.inf
    return out


# ---------------------------------------------------------------------------
# property suites

def _random_cov(rng, m):
    B = rng.standard_normal((m, m + 2))
    return B @ B.T


def dc_identity_checks(instances: int = 1000, m: int = 3, seed: int = 0, dps: int = 40) -> dict:
    """Worst relative errors of the three determinant identities on random covariances.

    DC(AX) = det(A)^2 DC(X); DC(aX, Y) = a^(2 m1) DC(X, Y); DC(X + BY, Y) = DC(X, Y).
    Transformed covariances are formed and reduced in extended precision so
    that an ill-conditioned A cannot mask the identity behind rounding.
    """
    rng = np.random.default_rng(seed)
    worst = {"linear_map": 0.0, "block_scaling": 0.0, "block_shear": 0.0}

    def rel(got, want):
        return float(abs(got - want) / abs(want))

    with mpmath.workdps(dps):
        for _ in range(instances):
            C = mpmath.matrix(_random_cov(rng, m).tolist())
            base = dc(C)
            A = mpmath.matrix(rng.standard_normal((m, m)).tolist())
            got = dc(A * C * A.T)
            worst["linear_map"] = max(worst["linear_map"], rel(got, mpmath.det(A) ** 2 * base))
            # split into X (first m1 coordinates) and Y
            m1 = int(rng.integers(1, m))
            a = float(rng.uniform(0.2, 3.0)) * (1 if rng.random() < 0.5 else -1)
            S = mpmath.eye(m)
            for i in range(m1):
                S[i, i] = a
            got = dc(S * C * S.T)
            worst["block_scaling"] = max(worst["block_scaling"],
                                         rel(got, mpmath.mpf(a) ** (2 * m1) * base))
            Bm = mpmath.eye(m)
            shear = rng.standard_normal((m1, m - m1))
            for i in range(m1):
                for j in range(m - m1):
                    Bm[i, m1 + j] = shear[i, j]
            got = dc(Bm * C * Bm.T)
            worst["block_shear"] = max(worst["block_shear"], rel(got, base))
    return {"instances": instances, "worst_relative_error": worst}


def divided_difference_checks(oracle: CovarianceOracle, x: float = 0.0, rs=None,
                              dps: int = DEFAULT_DPS) -> dict:
    """Factorisation DC(f(x), f(y)) = (y - x)^2 DC(f(x), D f) and its y -> x limit."""
    rs = np.geomspace(1e-4, 1.0, 13) if rs is None else np.asarray(rs, dtype=float)
    fx = Functional.point((x,), (0,))
    dfx = Functional.point((x,), (1,))
    with mpmath.workdps(dps):
        limit = mpmath.det(oracle.matrix_mp([fx, dfx], dps=dps))
    rel, gaps = [], []
    for r in rs:
        a, b = dc_pair_values(oracle, x, x + float(r), dps)
        with mpmath.workdps(dps):
            rr = mpmath.mpf(float(x + r)) - mpmath.mpf(float(x))
            rel.append(float(abs(a - rr ** 2 * b) / abs(a)))
            gaps.append(float(abs(b - limit)))
    small = rs <= 1e-2
    rate = float(np.polyfit(np.log(rs[small]), np.log(np.asarray(gaps)[small]), 1)[0])
    return {"r": rs.tolist(), "factorisation_relative_error": rel,
            "limit": float(limit), "limit_gap": gaps, "convergence_rate": rate}
