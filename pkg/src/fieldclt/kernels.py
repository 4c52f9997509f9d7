"""Convolution kernels q, their covariance K = q * q, and derivative oracles.

A field is f = q * W with W unit-intensity white noise, so that
Cov(d^a f(x), d^g f(y)) = (-1)^|a| d^(a+g) K(y - x).  Gaussian families are
handled in closed form through Hermite polynomials; tabulated kernels are
interpolated with cubic splines and their covariances obtained numerically.
"""
from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import mpmath
import numpy as np
from numpy.polynomial import hermite, hermite_e
from scipy.interpolate import CubicSpline, RectBivariateSpline

from .errors import UnsupportedDerivativeOrder, UnsupportedDimension

BARGMANN_FOCK = "bargmann-fock"
GAUSSIAN = "gaussian"
TABULATED = "tabulated"
FAMILIES = (BARGMANN_FOCK, GAUSSIAN, TABULATED)

ANALYTIC = "analytic"
NUMERIC = "numeric"

MAX_ANALYTIC_ORDER = 5
MAX_TABULATED_ORDER = 2
DEFAULT_TAIL_TOL = 1e-8


def multi_indices(d: int, max_order: int, min_order: int = 0) -> list[tuple[int, ...]]:
    """All multi-indices of length d with min_order <= |a| <= max_order, graded."""
    out = []
    for order in range(min_order, max_order + 1):
        out.extend(_indices_of_order(d, order))
    return out


def _indices_of_order(d, order):
    if d == 1:
        return [(order,)]
    res = []
    for first in range(order, -1, -1):
        for rest in _indices_of_order(d - 1, order - first):
            res.append((first,) + rest)
    return res


def _gauss_factor(t, n, s):
    """n-th derivative of exp(-t^2/s^2) (physicists' Hermite)."""
    u = np.asarray(t, dtype=float) / s
    coef = np.zeros(n + 1)
    coef[n] = 1.0
    return (-1.0 / s) ** n * hermite.hermval(u, coef) * np.exp(-u * u)


def _cov_factor(t, n, s):
    """n-th derivative of exp(-t^2/(2 s^2)) (probabilists' Hermite)."""
    u = np.asarray(t, dtype=float) / s
    coef = np.zeros(n + 1)
    coef[n] = 1.0
    return (-1.0 / s) ** n * hermite_e.hermeval(u, coef) * np.exp(-0.5 * u * u)


def _he_mp(n, u):
    h0, h1 = mpmath.mpf(1), u
    if n == 0:
        return h0
    for k in range(1, n):
        h0, h1 = h1, u * h1 - k * h0
    return h1


@functools.lru_cache(maxsize=None)
def _unit_truncation_radius(d: int, tol: float) -> float:
    """Smallest radius (in units of the Gaussian scale) whose tail mass of
    |d^a q| is below tol for every |a| <= 2."""
    step = 0.01
    if d <= 2:
        t = np.arange(-10.0, 10.0 + step / 2, step)
        factors = [np.abs(_gauss_factor(t, n, 1.0)) for n in range(3)]
        if d == 1:
            r2 = t * t
        else:
            r2 = t[:, None] ** 2 + t[None, :] ** 2
        radii = np.arange(1.0, 10.0, 0.05)
        tails = np.zeros_like(radii)
        for alpha in multi_indices(d, 2):
            dens = factors[alpha[0]]
            if d == 2:
                dens = dens[:, None] * factors[alpha[1]][None, :]
            total = dens.sum()
            # tail mass as a function of radius, via sorting r^2
            order = np.argsort(r2, axis=None)
            cum = np.cumsum(dens.ravel()[order][::-1])[::-1] / total
            r_sorted = np.sqrt(r2.ravel()[order])
            idx = np.searchsorted(r_sorted, radii, side="right")
            tail = np.where(idx < cum.size, cum[np.minimum(idx, cum.size - 1)], 0.0)
            tails = np.maximum(tails, tail)
        ok = np.nonzero(tails < tol)[0]
        return round(float(radii[ok[0]]), 2)
    # union bound over axes for d >= 3
    one_d = _unit_truncation_radius(1, tol / d)
    return float(math.ceil(one_d * math.sqrt(d) * 20) / 20)


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """Analytic or tabulated description of the moving-average kernel q."""

    dimension: int
    family: str = BARGMANN_FOCK
    scale: float = 1.0
    truncation_radius: float | None = None
    decay_exponent: float | str = "super-polynomial"
    table: np.ndarray | None = field(default=None, repr=False)
    table_spacing: float | None = None
    tail_tol: float = DEFAULT_TAIL_TOL

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family == BARGMANN_FOCK and self.scale != 1.0:
            raise ValueError("the Bargmann-Fock kernel has unit scale")
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        if self.family == TABULATED:
            if self.table is None or self.table_spacing is None:
                raise ValueError("tabulated kernels need a table and a spacing")
            if self.dimension > 2:
                raise UnsupportedDimension("tabulated kernels support d <= 2")
            tab = np.asarray(self.table, dtype=float)
            if tab.ndim != self.dimension or len(set(tab.shape)) != 1:
                raise ValueError("table must be a square grid of dimension d")
            object.__setattr__(self, "table", tab)
            if self.truncation_radius is None:
                half = 0.5 * (tab.shape[0] - 1) * self.table_spacing
                object.__setattr__(self, "truncation_radius", float(half))
        elif self.truncation_radius is None:
            radius = self.scale * _unit_truncation_radius(self.dimension, self.tail_tol)
            object.__setattr__(self, "truncation_radius", float(radius))
        if self.truncation_radius <= 0:
            raise ValueError("truncation radius must be positive")

    # -- constructors -------------------------------------------------
    @classmethod
    def bargmann_fock(cls, dimension: int, truncation_radius: float | None = None) -> "KernelSpec":
        return cls(dimension, BARGMANN_FOCK, 1.0, truncation_radius)

    @classmethod
    def gaussian(cls, dimension: int, scale: float, truncation_radius: float | None = None) -> "KernelSpec":
        return cls(dimension, GAUSSIAN, float(scale), truncation_radius)

    @classmethod
    def tabulated(cls, values, spacing: float, truncation_radius: float | None = None,
                  decay_exponent: float | str = "super-polynomial") -> "KernelSpec":
        values = np.asarray(values, dtype=float)
        return cls(values.ndim, TABULATED, 1.0, truncation_radius, decay_exponent,
                   values, float(spacing))

    @classmethod
    def from_csv(cls, path, truncation_radius: float | None = None) -> "KernelSpec":
        """Load a tabulated kernel from rows (x1, ..., xd, value) on a regular grid."""
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    rows.append([float(v) for v in row])
                except ValueError:
                    continue  # header line
        arr = np.asarray(rows)
        if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] < 2:
            raise ValueError("CSV kernel needs rows of (x1, ..., xd, value)")
        d = arr.shape[1] - 1
        axes = [np.unique(arr[:, i]) for i in range(d)]
        n = axes[0].size
        if any(a.size != n for a in axes) or arr.shape[0] != n**d:
            raise ValueError("CSV kernel must cover a full square grid")
        spacing = float(axes[0][1] - axes[0][0])
        idx = [np.searchsorted(axes[i], arr[:, i]) for i in range(d)]
        table = np.zeros((n,) * d)
        table[tuple(idx)] = arr[:, d]
        return cls.tabulated(table, spacing, truncation_radius)

    # -- properties ---------------------------------------------------
    @property
    def is_analytic(self) -> bool:
        return self.family != TABULATED

    @property
    def is_separable(self) -> bool:
        return self.is_analytic

    @property
    def padding(self) -> int:
        """Whole unit cubes of padding needed around a domain."""
        return int(math.ceil(self.truncation_radius - 1e-12))

    @property
    def max_order(self) -> int:
        return MAX_ANALYTIC_ORDER if self.is_analytic else MAX_TABULATED_ORDER

    @property
    def normalisation(self) -> float:
        """Per-axis constant c with q(x) = prod c exp(-x_i^2/s^2)."""
        return (2.0 / (math.pi * self.scale**2)) ** 0.25

    @property
    def key(self) -> tuple:
        tab = None
        if self.table is not None:
            tab = hash(self.table.tobytes())
        return (self.dimension, self.family, self.scale, self.truncation_radius, tab,
                self.table_spacing)

    def describe(self) -> dict:
        out = {"dimension": self.dimension, "family": self.family, "scale": self.scale,
               "truncation_radius": self.truncation_radius,
               "decay_exponent": self.decay_exponent}
        if self.table is not None:
            out["table_shape"] = list(self.table.shape)
            out["table_spacing"] = self.table_spacing
        return out

    # -- spline backing for tabulated kernels ---------------------------
    @functools.cached_property
    def _spline(self):
        n = self.table.shape[0]
        axis = (np.arange(n) - 0.5 * (n - 1)) * self.table_spacing
        if self.dimension == 1:
            return CubicSpline(axis, self.table)
        return RectBivariateSpline(axis, axis, self.table, kx=3, ky=3, s=0)


def _check_alpha(spec: KernelSpec, alpha) -> tuple[int, ...]:
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != spec.dimension or any(a < 0 for a in alpha):
        raise ValueError(f"bad multi-index {alpha} for d={spec.dimension}")
    if sum(alpha) > spec.max_order:
        raise UnsupportedDerivativeOrder(
            f"|alpha|={sum(alpha)} exceeds {spec.max_order} for family {spec.family}")
    return alpha


def eval_kernel(spec: KernelSpec, x, alpha=None, truncate: bool = True) -> np.ndarray | float:
    """Evaluate d^alpha q at x (shape (..., d) or a scalar when d == 1).

    Returns exactly 0 where |x| > truncation radius unless truncate=False.
    """
    d = spec.dimension
    alpha = _check_alpha(spec, alpha if alpha is not None else (0,) * d)
    pts = np.asarray(x, dtype=float)
    scalar = pts.ndim == 0 or (pts.ndim == 1 and d > 1 and pts.shape[0] == d)
    if d == 1 and (pts.ndim == 0 or pts.shape[-1] != 1):
        pts = pts[..., None]
    if pts.shape[-1] != d:
        raise ValueError("points must have trailing dimension d")
    if spec.is_analytic:
        val = np.ones(pts.shape[:-1])
        c = spec.normalisation
        for i, a in enumerate(alpha):
            val = val * (c * _gauss_factor(pts[..., i], a, spec.scale))
    else:
        val = _eval_tabulated(spec, pts, alpha)
    if truncate:
        r2 = np.sum(pts * pts, axis=-1)
        val = np.where(r2 > spec.truncation_radius**2, 0.0, val)
    if scalar:
        return float(np.asarray(val).reshape(-1)[0])
    return val


def _eval_tabulated(spec, pts, alpha):
    spl = spec._spline
    if spec.dimension == 1:
        out = spl(pts[..., 0], alpha[0])
    else:
        out = spl.ev(pts[..., 0], pts[..., 1], dx=alpha[0], dy=alpha[1])
    # spline is meaningless beyond the table: clamp to zero
    half = 0.5 * (spec.table.shape[0] - 1) * spec.table_spacing
    inside = np.all(np.abs(pts) <= half, axis=-1)
    return np.where(inside, out, 0.0)


def covariance_derivative(spec: KernelSpec, r, beta) -> np.ndarray:
    """d^beta K(r) for analytic families, K(r) = exp(-|r|^2 / (2 s^2))."""
    if not spec.is_analytic:
        raise UnsupportedDerivativeOrder("closed-form covariance needs an analytic family")
    r = np.asarray(r, dtype=float)
    if spec.dimension == 1 and (r.ndim == 0 or r.shape[-1] != 1):
        r = r[..., None]
    val = np.ones(r.shape[:-1])
    for i, b in enumerate(beta):
        val = val * _cov_factor(r[..., i], int(b), spec.scale)
    return val


def covariance_derivative_mp(spec: KernelSpec, r: Sequence, beta: Sequence[int]):
    """Extended-precision d^beta K(r); uses the current mpmath working precision."""
    s = mpmath.mpf(spec.scale)
    val = mpmath.mpf(1)
    for ri, b in zip(r, beta):
        u = mpmath.mpf(ri) / s
        val *= (-1 / s) ** int(b) * _he_mp(int(b), u) * mpmath.exp(-u * u / 2)
    return val


# ---------------------------------------------------------------------------
# linear functionals of the field and the covariance oracle

@dataclass(frozen=True)
class Functional:
    """A finite linear combination sum_k c_k d^{a_k} f(x_k)."""

    terms: tuple[tuple[float, tuple[float, ...], tuple[int, ...]], ...]
    label: str = ""

    @classmethod
    def point(cls, x, alpha, label: str = "") -> "Functional":
        x = tuple(float(v) for v in np.atleast_1d(x))
        return cls(((1.0, x, tuple(int(a) for a in alpha)),), label)

    @classmethod
    def directional(cls, x, directions: Sequence[Sequence[float]], label: str = "") -> "Functional":
        """d_{v1} d_{v2} ... f(x) for the given direction vectors."""
        x = tuple(float(v) for v in np.atleast_1d(x))
        d = len(x)
        acc: dict[tuple[int, ...], float] = {}

        def rec(k, alpha, coef):
            if k == len(directions):
                acc[alpha] = acc.get(alpha, 0.0) + coef
                return
            for i in range(d):
                c = float(directions[k][i])
                if c != 0.0:
                    a = list(alpha)
                    a[i] += 1
                    rec(k + 1, tuple(a), coef * c)

        rec(0, (0,) * d, 1.0)
        terms = tuple((c, x, a) for a, c in sorted(acc.items()) if c != 0.0)
        return cls(terms, label)

    @property
    def points(self):
        return [t[1] for t in self.terms]

    def shifted(self, offset) -> "Functional":
        off = np.asarray(offset, dtype=float)
        return Functional(tuple((c, tuple(np.asarray(x) + off), a) for c, x, a in self.terms),
                          self.label)


def gradient_functionals(x, d: int | None = None) -> list[Functional]:
    x = tuple(np.atleast_1d(np.asarray(x, dtype=float)))
    d = len(x)
    return [Functional.point(x, tuple(int(i == j) for j in range(d)), f"d{i}f{x}")
            for i in range(d)]


def hessian_functionals(x) -> list[Functional]:
    """Upper-triangle Hessian entries (i <= j) at x."""
    x = tuple(np.atleast_1d(np.asarray(x, dtype=float)))
    d = len(x)
    out = []
    for i in range(d):
        for j in range(i, d):
            a = [0] * d
            a[i] += 1
            a[j] += 1
            out.append(Functional.point(x, a, f"d{i}{j}f{x}"))
    return out


def hessian_from_upper(vals: np.ndarray, d: int) -> np.ndarray:
    """Rebuild symmetric (..., d, d) matrices from upper-triangle entries."""
    vals = np.asarray(vals)
    H = np.empty(vals.shape[:-1] + (d, d))
    k = 0
    for i in range(d):
        for j in range(i, d):
            H[..., i, j] = vals[..., k]
            H[..., j, i] = vals[..., k]
            k += 1
    return H


class CovarianceOracle:
    """Covariances Cov(d^a f(x), d^g f(y)) for the field built from a kernel.

    Sign convention: Cov(d^a f(x), d^g f(y)) = (-1)^|a| (d^(a+g) K)(y - x).
    """

    def __init__(self, kernel: KernelSpec, method: str | None = None,
                 quad_spacing: float | None = None):
        if method is None:
            method = ANALYTIC if kernel.is_analytic else NUMERIC
        if method not in (ANALYTIC, NUMERIC):
            raise ValueError(f"unknown covariance method {method!r}")
        if method == ANALYTIC and not kernel.is_analytic:
            raise UnsupportedDerivativeOrder("tabulated kernels need method='numeric'")
        self.kernel = kernel
        self.method = method
        if quad_spacing is None:
            quad_spacing = 0.05 * kernel.scale if kernel.is_analytic else 0.5 * kernel.table_spacing
        self.quad_spacing = float(quad_spacing)

    @property
    def dimension(self):
        return self.kernel.dimension

    def cov(self, alpha, gamma, x, y) -> float:
        d = self.dimension
        alpha = tuple(int(a) for a in np.atleast_1d(alpha))
        gamma = tuple(int(a) for a in np.atleast_1d(gamma))
        if len(alpha) != d or len(gamma) != d:
            raise ValueError("multi-index length must equal d")
        if self.method == ANALYTIC:
            if sum(alpha) + sum(gamma) > 2 * MAX_ANALYTIC_ORDER:
                raise UnsupportedDerivativeOrder("|alpha|+|gamma| too large")
            r = np.atleast_1d(np.asarray(y, dtype=float) - np.asarray(x, dtype=float))
            beta = tuple(a + g for a, g in zip(alpha, gamma))
            return float((-1) ** sum(alpha) * covariance_derivative(self.kernel, r, beta))
        for a in (alpha, gamma):
            if sum(a) > self.kernel.max_order:
                raise UnsupportedDerivativeOrder("numeric covariance supports |alpha| <= 2")
        return float(self._numeric_cov(alpha, gamma, np.atleast_1d(np.asarray(y, float)
                                                                   - np.asarray(x, float))))

    @functools.cached_property
    def _quad_grid(self):
        d = self.dimension
        T = self.kernel.truncation_radius
        n = int(math.ceil(T / self.quad_spacing))
        ax = (np.arange(-n, n) + 0.5) * self.quad_spacing
        mesh = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1)
        return mesh

    def _numeric_cov(self, alpha, gamma, r):
        s = self._quad_grid
        a = eval_kernel(self.kernel, s, alpha)
        b = eval_kernel(self.kernel, s + r, gamma)
        return np.sum(a * b) * self.quad_spacing ** self.dimension

    def functional_cov(self, u: Functional, v: Functional) -> float:
        total = 0.0
        for cu, xu, au in u.terms:
            for cv, xv, av in v.terms:
                total += cu * cv * self.cov(au, av, xu, xv)
        return total

    def matrix(self, left: Iterable[Functional], right: Iterable[Functional] | None = None) -> np.ndarray:
        left = list(left)
        sym = right is None
        right = left if sym else list(right)
        M = np.empty((len(left), len(right)))
        for i, u in enumerate(left):
            for j, v in enumerate(right):
                if sym and j < i:
                    M[i, j] = M[j, i]
                else:
                    M[i, j] = self.functional_cov(u, v)
        return M

    def matrix_mp(self, left: Iterable[Functional], right: Iterable[Functional] | None = None,
                  dps: int = 50):
        """Covariance matrix in extended precision (analytic families only)."""
        if self.method != ANALYTIC:
            raise UnsupportedDerivativeOrder("extended precision needs an analytic kernel")
        left = list(left)
        sym = right is None
        right = left if sym else list(right)
        with mpmath.workdps(dps):
            M = mpmath.matrix(len(left), len(right))
            for i, u in enumerate(left):
                for j, v in enumerate(right):
                    if sym and j < i:
                        M[i, j] = M[j, i]
                        continue
                    tot = mpmath.mpf(0)
                    for cu, xu, au in u.terms:
                        for cv, xv, av in v.terms:
                            r = [mpmath.mpf(b) - mpmath.mpf(a) for a, b in zip(xu, xv)]
                            beta = [p + q for p, q in zip(au, av)]
                            tot += (mpmath.mpf(cu) * mpmath.mpf(cv) * (-1) ** sum(au)
                                    * covariance_derivative_mp(self.kernel, r, beta))
                    M[i, j] = tot
        return M


def eval_covariance(oracle: CovarianceOracle, alpha, gamma, x, y) -> float:
    """Cov(d^alpha f(x), d^gamma f(y))."""
    return oracle.cov(alpha, gamma, x, y)


# ---------------------------------------------------------------------------
# diagnostics backing the kernel invariants

def hermitian_deviation(spec: KernelSpec, n: int = 41) -> float:
    """max |q(x) - q(-x)| over a symmetric probe grid."""
    T = spec.truncation_radius
    ax = np.linspace(-T, T, n)
    pts = np.stack(np.meshgrid(*([ax] * spec.dimension), indexing="ij"), axis=-1)
    return float(np.max(np.abs(eval_kernel(spec, pts) - eval_kernel(spec, -pts))))


def tail_fraction(spec: KernelSpec, alpha=None, radius: float | None = None,
                  spacing: float | None = None) -> float:
    """Fraction of the L1 mass of |d^alpha q| lying outside the given radius."""
    d = spec.dimension
    alpha = alpha if alpha is not None else (0,) * d
    radius = spec.truncation_radius if radius is None else radius
    if spacing is None:
        spacing = 0.02 * spec.scale if spec.is_analytic else spec.table_spacing / 2
    extent = 3.0 * radius
    ax = (np.arange(-extent, extent, spacing)) + spacing / 2
    pts = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1)
    vals = np.abs(eval_kernel(spec, pts, alpha, truncate=False))
    r2 = np.sum(pts * pts, axis=-1)
    total = vals.sum()
    return float(vals[r2 > radius**2].sum() / total) if total > 0 else 0.0


def self_convolution(spec: KernelSpec, r, spacing: float = 0.05) -> np.ndarray:
    """(q * q)(r) by midpoint quadrature, for comparison with K."""
    oracle = CovarianceOracle(spec, NUMERIC, quad_spacing=spacing)
    r = np.atleast_2d(np.asarray(r, dtype=float).reshape(-1, spec.dimension))
    zero = (0,) * spec.dimension
    return np.array([oracle._numeric_cov(zero, zero, ri) for ri in r])
