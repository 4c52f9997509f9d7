"""Discretised white noise and the moving-average field f = q * W on a box.

White noise is represented by i.i.d. N(0, h^d) weights on h-cells tiling a
padded box.  The field at a point x is the finite sum
``sum_c w_c q(x - c)`` over cell centres c, so the discrete field is itself a
smooth function that can be evaluated exactly anywhere inside the domain.
Grid samples are produced by FFT convolution; resampling a unit cube updates
the field by a direct (exactly local) convolution.
"""
from __future__ import annotations

import functools
import json
import math
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np
from scipy import fft as sfft
from scipy.signal import convolve

from .domain import BoxDomain, grid_count
from .errors import CubeOutOfExtent, GridMismatch, GridTooLarge, MissingDerivatives
from .kernels import (KernelSpec, _gauss_factor, eval_kernel, multi_indices)

DEFAULT_MEMORY_BUDGET = 1.5e9  # bytes
MASK64 = (1 << 64) - 1


# ---------------------------------------------------------------------------
# seeds

def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(base_seed: int, *indices: int) -> int:
    """Stateless per-trial seed: splitmix64 chained over the indices."""
    s = splitmix64(int(base_seed) & MASK64)
    for i in indices:
        s = splitmix64((s ^ (int(i) & MASK64)) & MASK64)
    return s


# ---------------------------------------------------------------------------
# white noise

def padding_for(kernel: KernelSpec, h: float) -> int:
    """Whole unit cubes of noise needed around a domain.

    Covers every cell whose centre can lie within the truncation radius of an
    evaluation point, including points offset by less than one cell.
    """
    return int(math.ceil(kernel.truncation_radius + h - 1e-12))


GAUSSIAN_LAW = "gaussian"
RADEMACHER_LAW = "rademacher"


def draw_weights(rng: np.random.Generator, shape, h: float, d: int,
                 law: str = GAUSSIAN_LAW) -> np.ndarray:
    """i.i.d. cell weights with mean 0 and variance h^d.

    The Rademacher law (+-h^(d/2)) has the same two moments and makes small
    configurations exhaustively enumerable.
    """
    scale = h ** (d / 2)
    if law == GAUSSIAN_LAW:
        return rng.standard_normal(shape) * scale
    if law == RADEMACHER_LAW:
        return (2.0 * rng.integers(0, 2, size=shape) - 1.0) * scale
    raise ValueError(f"unknown noise law {law!r}")


@dataclass(eq=False)
class WhiteNoiseGrid:
    """Cell weights of discretised unit-intensity white noise."""

    spacing: float
    lower: tuple[int, ...]
    values: np.ndarray
    seed: int | None = None
    law: str = GAUSSIAN_LAW

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.lower = tuple(int(v) for v in self.lower)
        k = 1.0 / self.spacing
        if abs(k - round(k)) > 1e-9:
            raise ValueError("1/h must be an integer")
        self.cells_per_unit = int(round(k))
        if any(n % self.cells_per_unit for n in self.values.shape):
            raise ValueError("noise array must cover whole unit cubes")

    @classmethod
    def draw(cls, extent: BoxDomain, h: float, seed: int,
             law: str = GAUSSIAN_LAW) -> "WhiteNoiseGrid":
        shape = tuple(grid_count(s, h) for s in extent.sides)
        rng = np.random.default_rng(seed)
        vals = draw_weights(rng, shape, h, extent.dimension, law)
        return cls(h, extent.lower, vals, seed, law)

    @classmethod
    def zeros(cls, extent: BoxDomain, h: float) -> "WhiteNoiseGrid":
        shape = tuple(grid_count(s, h) for s in extent.sides)
        return cls(h, extent.lower, np.zeros(shape), None)

    @property
    def dimension(self) -> int:
        return self.values.ndim

    @property
    def cell_variance(self) -> float:
        return self.spacing ** self.dimension

    @property
    def extent(self) -> BoxDomain:
        upper = tuple(a + n // self.cells_per_unit for a, n in zip(self.lower, self.values.shape))
        return BoxDomain(self.lower, upper)

    def cube_slices(self, v) -> tuple[slice, ...]:
        """Cells belonging to the unit cube v + [0,1]^d."""
        k = self.cells_per_unit
        sl = []
        for vi, a, n in zip(v, self.lower, self.values.shape):
            start = (int(vi) - a) * k
            if start < 0 or start + k > n:
                raise CubeOutOfExtent(f"cube {tuple(v)} outside noise extent {self.extent}")
            sl.append(slice(start, start + k))
        return tuple(sl)

    def cube_index(self) -> dict[tuple[int, ...], tuple[slice, ...]]:
        return {v: self.cube_slices(v) for v in self.extent.cubes()}

    def cube_mask(self, cubes: Iterable) -> np.ndarray:
        mask = np.zeros(self.values.shape, dtype=bool)
        for v in cubes:
            mask[self.cube_slices(v)] = True
        return mask

    def replaced(self, cubes: Iterable, seed2: int) -> "WhiteNoiseGrid":
        """Copy with fresh i.i.d. weights on the listed cubes, in sorted order."""
        vals = self.values.copy()
        rng = np.random.default_rng(seed2)
        k = self.cells_per_unit
        for v in sorted({tuple(int(c) for c in v) for v in cubes}):
            vals[self.cube_slices(v)] = draw_weights(rng, (k,) * self.dimension, self.spacing,
                                                     self.dimension, self.law)
        return WhiteNoiseGrid(self.spacing, self.lower, vals, self.seed, self.law)

    def with_values(self, values: np.ndarray) -> "WhiteNoiseGrid":
        return WhiteNoiseGrid(self.spacing, self.lower, values, self.seed, self.law)


# ---------------------------------------------------------------------------
# stencils and FFT convolution

_STENCIL_CACHE: "OrderedDict[tuple, np.ndarray]" = OrderedDict()
_STENCIL_CACHE_SIZE = 96


def _stencil(kernel: KernelSpec, h: float, M: int, alpha, shift) -> np.ndarray:
    """d^alpha q at offsets (k - M + 1/2) h + shift for k = 0..2M-1 per axis."""
    d = kernel.dimension
    axes = [(np.arange(2 * M) - M + 0.5) * h + s for s in shift]
    if kernel.is_analytic:
        c = kernel.normalisation
        factors = [c * _gauss_factor(ax, a, kernel.scale) for ax, a in zip(axes, alpha)]
        st = factors[0]
        for fac in factors[1:]:
            st = np.multiply.outer(st, fac)
        r2 = functools.reduce(np.add.outer, [ax * ax for ax in axes]) if d > 1 else axes[0] ** 2
        return np.where(r2 > kernel.truncation_radius ** 2, 0.0, st)
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return np.asarray(eval_kernel(kernel, mesh, alpha), dtype=float)


def _stencil_fft(kernel, h, M, alpha, shift, fshape):
    key = (kernel.key, h, M, tuple(alpha), tuple(shift), tuple(fshape))
    hit = _STENCIL_CACHE.get(key)
    if hit is not None:
        _STENCIL_CACHE.move_to_end(key)
        return hit
    out = sfft.rfftn(_stencil(kernel, h, M, alpha, shift), fshape)
    _STENCIL_CACHE[key] = out
    if len(_STENCIL_CACHE) > _STENCIL_CACHE_SIZE:
        _STENCIL_CACHE.popitem(last=False)
    return out


def _fft_fields(noise: WhiteNoiseGrid, kernel: KernelSpec, h: float, M: int,
                alphas, n_out, oversample: int) -> dict:
    """Valid-region convolutions of the noise with each derivative stencil."""
    d = noise.dimension
    shape = noise.values.shape
    fshape = [sfft.next_fast_len(n, real=True) for n in shape]
    W = sfft.rfftn(noise.values, fshape)
    L = 2 * M
    k = oversample
    out = {}
    fine = tuple((m - 1) * k + 1 for m in n_out)
    for alpha in alphas:
        if k == 1:
            full = sfft.irfftn(W * _stencil_fft(kernel, h, M, alpha, (0.0,) * d, fshape), fshape)
            sl = tuple(slice(L - 1, L - 1 + m) for m in n_out)
            out[alpha] = np.ascontiguousarray(full[sl])
            continue
        arr = np.empty(fine)
        for shift in np.ndindex(*(k,) * d):
            offs = tuple(s * h / k for s in shift)
            full = sfft.irfftn(W * _stencil_fft(kernel, h, M, alpha, offs, fshape), fshape)
            counts = tuple(len(range(s, f, k)) for s, f in zip(shift, fine))
            sl = tuple(slice(L - 1, L - 1 + c) for c in counts)
            arr[tuple(slice(s, None, k) for s in shift)] = full[sl]
        out[alpha] = arr
    return out


# ---------------------------------------------------------------------------
# realizations

Evaluator = Callable[[np.ndarray, list], np.ndarray]


@dataclass(eq=False)
class FieldRealization:
    """Grid samples of a field and its derivatives on a closed box.

    ``arrays[alpha]`` holds d^alpha f on the grid ``domain.grid_axes(h)``.
    ``evaluator(points, alphas)`` returns exact values at arbitrary points
    inside the domain, shape (n_points, len(alphas)).
    """

    domain: BoxDomain
    h: float
    arrays: dict
    evaluator: Evaluator | None = None
    kernel: KernelSpec | None = None
    noise: WhiteNoiseGrid | None = None
    seed: int | None = None
    resampled: tuple = ()
    max_order: int = 2
    perturbation: "FieldRealization | None" = None
    provenance: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    @property
    def values(self) -> np.ndarray:
        return self.arrays[(0,) * self.dimension]

    def __getitem__(self, alpha) -> np.ndarray:
        alpha = tuple(alpha)
        if alpha not in self.arrays:
            raise MissingDerivatives(f"derivative {alpha} was not sampled")
        return self.arrays[alpha]

    def has(self, alphas) -> bool:
        return all(tuple(a) in self.arrays for a in alphas)

    def require(self, order: int):
        for a in multi_indices(self.dimension, order):
            if a not in self.arrays:
                raise MissingDerivatives(f"derivative {a} was not sampled")

    def evaluate(self, points, alphas=None) -> np.ndarray:
        """Exact d^alpha f at arbitrary points, shape (n, len(alphas))."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.dimension == 1 and pts.shape[-1] != 1:
            pts = pts.reshape(-1, 1)
        if alphas is None:
            alphas = [(0,) * self.dimension]
        alphas = [tuple(a) for a in alphas]
        if self.evaluator is None:
            raise MissingDerivatives("this realization has no point evaluator")
        return self.evaluator(pts, alphas)

    def grid_points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.domain.grid_axes(self.h), indexing="ij")
        return np.stack(mesh, axis=-1)

    def __add__(self, other: "FieldRealization") -> "FieldRealization":
        return add_fields(self, other)

    def __neg__(self) -> "FieldRealization":
        return scale_field(self, -1.0)

    def shifted(self, c: float) -> "FieldRealization":
        """f - c, used to turn level-c questions into level-0 ones."""
        zero = (0,) * self.dimension
        arrays = dict(self.arrays)
        arrays[zero] = self.arrays[zero] - c
        ev = self.evaluator

        def evaluator(pts, alphas):
            out = ev(pts, alphas)
            for j, a in enumerate(alphas):
                if a == zero:
                    out[:, j] -= c
            return out

        return FieldRealization(self.domain, self.h, arrays, evaluator if ev else None,
                                self.kernel, self.noise, self.seed, self.resampled,
                                self.max_order, provenance=dict(self.provenance))

    def restricted(self, sub: BoxDomain) -> "FieldRealization":
        """View of the same field on a sub-box (grid-aligned)."""
        if not self.domain.contains_box(sub) or sub.dimension != self.dimension:
            raise GridMismatch("sub-box is not inside the realization domain")
        sl = tuple(slice(grid_count(b - a, self.h), grid_count(b - a, self.h) + n)
                   for a, b, n in zip(self.domain.lower, sub.lower, sub.grid_shape(self.h)))
        arrays = {a: v[sl] for a, v in self.arrays.items()}
        return FieldRealization(sub, self.h, arrays, self.evaluator, self.kernel, self.noise,
                                self.seed, self.resampled, self.max_order,
                                provenance=dict(self.provenance))

    def describe(self) -> dict:
        out = {"domain": {"lower": list(self.domain.lower), "upper": list(self.domain.upper)},
               "h": self.h, "seed": self.seed,
               "resampled": [list(v) for v in self.resampled],
               "derivatives": [list(a) for a in sorted(self.arrays)]}
        if self.kernel is not None:
            out["kernel"] = self.kernel.describe()
        if self.noise is not None:
            out["noise_spacing"] = self.noise.spacing
        out.update(self.provenance)
        return out


def _check_same_grid(a: FieldRealization, b: FieldRealization):
    if a.domain != b.domain or abs(a.h - b.h) > 1e-15:
        raise GridMismatch("fields live on different grids")


def add_fields(a: FieldRealization, b: FieldRealization) -> FieldRealization:
    _check_same_grid(a, b)
    keys = [k for k in a.arrays if k in b.arrays]
    arrays = {k: a.arrays[k] + b.arrays[k] for k in keys}
    ev = None
    if a.evaluator is not None and b.evaluator is not None:
        ea, eb = a.evaluator, b.evaluator

        def ev(pts, alphas):
            return ea(pts, alphas) + eb(pts, alphas)

    return FieldRealization(a.domain, a.h, arrays, ev, a.kernel, a.noise, a.seed,
                            a.resampled, min(a.max_order, b.max_order), perturbation=b,
                            provenance=dict(a.provenance))


def scale_field(a: FieldRealization, t: float) -> FieldRealization:
    arrays = {k: t * v for k, v in a.arrays.items()}
    ev = None
    if a.evaluator is not None:
        ea = a.evaluator

        def ev(pts, alphas):
            return t * ea(pts, alphas)

    return FieldRealization(a.domain, a.h, arrays, ev, a.kernel, a.noise, a.seed,
                            a.resampled, a.max_order, provenance=dict(a.provenance))


def _noise_evaluator(noise: WhiteNoiseGrid, kernel: KernelSpec, chunk: int = 256) -> Evaluator:
    """Exact evaluation of sum_c w_c d^alpha q(x - c) at arbitrary points."""
    h = noise.spacing
    d = noise.dimension
    T = kernel.truncation_radius
    span = int(math.ceil(T / h)) + 1
    K = 2 * span + 1
    padded = np.pad(noise.values, span + 1)
    lower = np.asarray(noise.lower, dtype=float)
    letters = "ijkl"[:d]
    spec = "n" + letters + "," + ",".join("n" + c for c in letters) + "->n"

    def shaped(arr, i, n):
        return arr.reshape((n,) + (1,) * i + (K,) + (1,) * (d - 1 - i))

    def evaluate(pts, alphas):
        out = np.zeros((pts.shape[0], len(alphas)))
        orders = sorted({a[i] for a in alphas for i in range(d)})
        for start in range(0, pts.shape[0], chunk):
            P = pts[start:start + chunk]
            n = P.shape[0]
            # nearest cell index per axis, then a fixed window around it
            centre = np.floor((P - lower) / h).astype(np.int64)
            idx = centre[:, :, None] + np.arange(-span, span + 1)[None, None, :]
            offs = P[:, :, None] - (lower[None, :, None] + (idx + 0.5) * h)
            pidx = idx + span + 1
            np.clip(pidx, 0, np.array(padded.shape)[None, :, None] - 1, out=pidx)
            Wb = padded[tuple(shaped(pidx[:, i], i, n) for i in range(d))]
            r2 = sum(shaped(offs[:, i] ** 2, i, n) for i in range(d))
            Wm = np.where(r2 <= T * T, Wb, 0.0)
            if kernel.is_analytic:
                c = kernel.normalisation
                fac = {(i, o): c * _gauss_factor(offs[:, i], o, kernel.scale)
                       for i in range(d) for o in orders}
                for j, alpha in enumerate(alphas):
                    fs = [fac[(i, alpha[i])] for i in range(d)]
                    if d == 1:
                        val = np.einsum("ni,ni->n", Wm, fs[0])
                    elif d == 2:
                        val = np.einsum("ni,ni->n", fs[0], np.matmul(Wm, fs[1][:, :, None])[..., 0])
                    else:
                        val = np.einsum(spec, Wm, *fs)
                    out[start:start + n, j] = val
            else:
                mesh = np.stack(np.broadcast_arrays(*[shaped(offs[:, i], i, n)
                                                      for i in range(d)]), axis=-1)
                for j, alpha in enumerate(alphas):
                    val = eval_kernel(kernel, mesh, alpha, truncate=False) * Wm
                    out[start:start + n, j] = val.reshape(n, -1).sum(axis=1)
        return out

    return evaluate


def _estimate_bytes(noise_shape, n_out, n_alphas, oversample, d):
    fine = np.prod([(m - 1) * oversample + 1 for m in n_out])
    return 8.0 * (3 * np.prod(noise_shape) + n_alphas * fine + (2 * np.prod(noise_shape)))


def noise_extent(kernel: KernelSpec, domain: BoxDomain, h: float) -> BoxDomain:
    P = padding_for(kernel, h)
    return BoxDomain(tuple(a - P for a in domain.lower), tuple(b + P for b in domain.upper))


def sample_field(kernel: KernelSpec, domain: BoxDomain, h: float, seed: int | None = None,
                 max_order: int = 2, oversample: int = 1, noise: WhiteNoiseGrid | None = None,
                 memory_budget: float = DEFAULT_MEMORY_BUDGET,
                 noise_law: str = GAUSSIAN_LAW) -> FieldRealization:
    """Sample f = q * W and its derivatives up to max_order on the closed box.

    The grid spacing is h / oversample; noise cells have side h.  Passing
    ``noise`` reuses an existing white-noise grid (its spacing wins).
    """
    if kernel.dimension != domain.dimension:
        raise GridMismatch("kernel and domain dimensions differ")
    if oversample < 1:
        raise ValueError("oversample must be >= 1")
    if noise is None:
        if seed is None:
            raise ValueError("need a seed or a noise grid")
        ext = noise_extent(kernel, domain, h)
        shape = tuple(grid_count(s, h) for s in ext.sides)
        n_out = domain.grid_shape(h)
        if _estimate_bytes(shape, n_out, 1, oversample, domain.dimension) > memory_budget:
            raise GridTooLarge(f"padded grid {shape} exceeds the memory budget")
        noise = WhiteNoiseGrid.draw(ext, h, seed, noise_law)
    h = noise.spacing
    P_lo = [a - e for a, e in zip(domain.lower, noise.lower)]
    P_hi = [e - b for b, e in zip(domain.upper, noise.extent.upper)]
    P = padding_for(kernel, h)
    if min(P_lo + P_hi) < P:
        raise CubeOutOfExtent("noise grid does not pad the domain by the kernel range")
    alphas = multi_indices(domain.dimension, min(max_order, kernel.max_order))
    n_out = domain.grid_shape(h)
    if _estimate_bytes(noise.values.shape, n_out, len(alphas), oversample,
                       domain.dimension) > memory_budget:
        raise GridTooLarge("derivative arrays exceed the memory budget")
    # crop the noise so that it pads the domain by exactly P units on each side
    k = noise.cells_per_unit
    crop = tuple(slice((lo - P) * k, (lo - P) * k + grid_count(s + 2 * P, h))
                 for lo, s in zip(P_lo, domain.sides))
    local = WhiteNoiseGrid(h, tuple(a - P for a in domain.lower), noise.values[crop], noise.seed,
                           noise.law)
    M = P * k
    arrays = _fft_fields(local, kernel, h, M, alphas, n_out, oversample)
    return FieldRealization(domain, h / oversample, arrays, _noise_evaluator(local, kernel),
                            kernel, local, noise.seed if seed is None else seed,
                            (), max_order=min(max_order, kernel.max_order))


def _perturbation(real: FieldRealization, delta: np.ndarray, origin: tuple) -> dict:
    """Exactly local convolution of a compact noise change with each stencil."""
    kernel = real.kernel
    noise = real.noise
    d = real.dimension
    h_noise = noise.spacing
    k_over = int(round(h_noise / real.h))
    k = noise.cells_per_unit
    M = int(round((real.domain.lower[0] - noise.lower[0]))) * k
    out = {}
    shape = real.values.shape
    for alpha in real.arrays:
        arr = np.zeros(shape)
        for shift in np.ndindex(*(k_over,) * d):
            offs = tuple(s * real.h for s in shift)
            st = _stencil(kernel, h_noise, M, alpha, offs)
            full = convolve(delta, st, mode="full", method="direct")
            # full[i] pairs with coarse output index origin + i - (2M - 1)
            dst, src = [], []
            ok = True
            for ax in range(d):
                start = origin[ax] - (2 * M - 1)
                count_fine = len(range(shift[ax], shape[ax], k_over))
                lo = max(start, 0)
                hi = min(start + full.shape[ax], count_fine)
                if hi <= lo:
                    ok = False
                    break
                dst.append(slice(shift[ax] + lo * k_over, shift[ax] + (hi - 1) * k_over + 1, k_over))
                src.append(slice(lo - start, hi - start))
            if ok:
                arr[tuple(dst)] = full[tuple(src)]
        out[alpha] = arr
    return out


def resample_cubes(real: FieldRealization, cubes, seed2: int,
                   return_perturbation: bool = True):
    """Redraw the white noise on the listed unit cubes.

    Returns (new realization, perturbation p = f_new - f).  The perturbation is
    itself a realization (driven by the noise difference) so that it can be
    evaluated exactly; it vanishes identically beyond the truncation radius of
    the resampled cubes.
    """
    if real.noise is None or real.kernel is None:
        raise MissingDerivatives("realization is not backed by a white-noise grid")
    cubes = sorted({tuple(int(c) for c in v) for v in cubes})
    for v in cubes:
        real.noise.cube_slices(v)
    if not cubes:
        zero = {a: np.zeros_like(v) for a, v in real.arrays.items()}
        pert = FieldRealization(real.domain, real.h, zero, lambda p, a: np.zeros((len(p), len(a))),
                                real.kernel, None, real.seed, (), real.max_order)
        same = FieldRealization(real.domain, real.h, dict(real.arrays), real.evaluator,
                                real.kernel, real.noise, real.seed, real.resampled,
                                real.max_order, provenance=dict(real.provenance))
        return (same, pert) if return_perturbation else same
    new_noise = real.noise.replaced(cubes, seed2)
    delta_full = new_noise.values - real.noise.values
    mask = real.noise.cube_mask(cubes)
    idx = np.nonzero(mask)
    lo = tuple(int(i.min()) for i in idx)
    hi = tuple(int(i.max()) + 1 for i in idx)
    delta = np.where(mask, delta_full, 0.0)[tuple(slice(a, b) for a, b in zip(lo, hi))]
    p_arrays = _perturbation(real, delta, lo)
    new_arrays = {a: real.arrays[a] + p_arrays[a] for a in real.arrays}
    delta_noise = real.noise.with_values(np.where(mask, delta_full, 0.0))
    p_real = FieldRealization(real.domain, real.h, p_arrays,
                              _noise_evaluator(delta_noise, real.kernel), real.kernel,
                              delta_noise, seed2, tuple(cubes), real.max_order)
    new = FieldRealization(real.domain, real.h, new_arrays,
                           _noise_evaluator(new_noise, real.kernel), real.kernel, new_noise,
                           real.seed, tuple(real.resampled) + tuple(cubes), real.max_order,
                           perturbation=p_real, provenance=dict(real.provenance))
    return (new, p_real) if return_perturbation else new


def lex_le(u, v) -> bool:
    """Lexicographic order on Z^d, coordinates compared left to right."""
    return tuple(u) <= tuple(v)


def half_space_freeze(cubes_or_real, pivot) -> tuple[list, list]:
    """Split cubes into those lexicographically <= pivot (frozen) and the rest."""
    if isinstance(cubes_or_real, FieldRealization):
        cubes = cubes_or_real.noise.extent.cubes()
    elif isinstance(cubes_or_real, WhiteNoiseGrid):
        cubes = cubes_or_real.extent.cubes()
    else:
        cubes = [tuple(v) for v in cubes_or_real]
    pivot = tuple(pivot)
    frozen = [tuple(v) for v in cubes if lex_le(v, pivot)]
    free = [tuple(v) for v in cubes if not lex_le(v, pivot)]
    return frozen, free


def redraw_free(noise: WhiteNoiseGrid, free_mask: np.ndarray, seed: int) -> WhiteNoiseGrid:
    """Keep frozen weights and draw every free weight afresh."""
    rng = np.random.default_rng(seed)
    fresh = draw_weights(rng, noise.values.shape, noise.spacing, noise.dimension, noise.law)
    return noise.with_values(np.where(free_mask, fresh, noise.values))


# ---------------------------------------------------------------------------
# deterministic (injected) fields

def injected_field(domain: BoxDomain, h: float, func: Callable, max_order: int = 2,
                   label: str = "injected") -> FieldRealization:
    """Realization of a deterministic function.

    ``func(points, alpha)`` must return d^alpha g at points of shape (n, d).
    """
    d = domain.dimension
    mesh = np.stack(np.meshgrid(*domain.grid_axes(h), indexing="ij"), axis=-1)
    flat = mesh.reshape(-1, d)
    alphas = multi_indices(d, max_order)
    arrays = {a: np.asarray(func(flat, a), dtype=float).reshape(mesh.shape[:-1]) for a in alphas}

    def evaluate(pts, als):
        return np.stack([np.asarray(func(pts, a), dtype=float) * np.ones(len(pts))
                         for a in als], axis=1)

    return FieldRealization(domain, h, arrays, evaluate, max_order=max_order,
                            provenance={"source": label})


def constant_function(c: float):
    def f(x, alpha):
        return np.full(len(x), float(c)) if sum(alpha) == 0 else np.zeros(len(x))
    return f


def ramp_function(a, b: float = 0.0):
    a = np.asarray(a, dtype=float)

    def f(x, alpha):
        s = sum(alpha)
        if s == 0:
            return x @ a + b
        if s == 1:
            return np.full(len(x), a[int(np.argmax(alpha))])
        return np.zeros(len(x))
    return f


def quadratic_function(x0, scale: float = 1.0):
    """scale * |x - x0|^2."""
    x0 = np.asarray(x0, dtype=float)

    def f(x, alpha):
        y = x - x0
        s = sum(alpha)
        if s == 0:
            return scale * np.sum(y * y, axis=1)
        if s == 1:
            return 2 * scale * y[:, int(np.argmax(alpha))]
        if s == 2 and max(alpha) == 2:
            return np.full(len(x), 2.0 * scale)
        return np.zeros(len(x))
    return f


def bump_function(center, height: float = 1.0, width: float = 1.0):
    """height * exp(-|x - center|^2 / (2 width^2)), derivatives via Hermite factors."""
    center = np.asarray(center, dtype=float)
    s = width * math.sqrt(2.0)  # exp(-t^2/s^2) with s^2 = 2 width^2

    def f(x, alpha):
        val = np.full(len(x), float(height))
        for i, a in enumerate(alpha):
            val = val * _gauss_factor(x[:, i] - center[i], a, s)
        return val
    return f


def sum_functions(*funcs):
    def f(x, alpha):
        return sum(g(x, alpha) for g in funcs)
    return f


# ---------------------------------------------------------------------------
# binary grid dump

GRID_MAGIC = b"FCLTGRID"
GRID_VERSION = 1


def dump_realization(real: FieldRealization, path, alphas=None) -> dict:
    """Write a binary grid file plus a JSON provenance sidecar (path + '.json').

    Header: magic, version (u32), d (u32), R (f64, half the largest side),
    h (f64), seed (u64), grid shape (d x u64), array count (u32); payload:
    little-endian float64 in C order, one array per derivative.
    """
    d = real.dimension
    if alphas is None:
        alphas = sorted(real.arrays, key=lambda a: (sum(a), tuple(-x for x in a)))
    alphas = [tuple(a) for a in alphas]
    R = max(real.domain.sides) / 2
    seed = int(real.seed or 0) & MASK64
    shape = real.values.shape
    with open(path, "wb") as fh:
        fh.write(GRID_MAGIC)
        fh.write(struct.pack("<IIddQ", GRID_VERSION, d, R, real.h, seed))
        fh.write(struct.pack("<" + "Q" * d, *shape))
        fh.write(struct.pack("<I", len(alphas)))
        for a in alphas:
            fh.write(np.ascontiguousarray(real[a], dtype="<f8").tobytes(order="C"))
    side = real.describe()
    side["arrays"] = [list(a) for a in alphas]
    side["format"] = {"magic": GRID_MAGIC.decode(), "version": GRID_VERSION,
                      "endianness": "little", "dtype": "float64", "order": "C"}
    with open(str(path) + ".json", "w") as fh:
        json.dump(side, fh, indent=2, sort_keys=True)
    return side


def load_grid(path) -> tuple[dict, dict]:
    """Read a binary grid file; returns (header, {alpha: array})."""
    with open(path, "rb") as fh:
        if fh.read(8) != GRID_MAGIC:
            raise ValueError("not a field grid file")
        version, d, R, h, seed = struct.unpack("<IIddQ", fh.read(struct.calcsize("<IIddQ")))
        shape = struct.unpack("<" + "Q" * d, fh.read(8 * d))
        (count,) = struct.unpack("<I", fh.read(4))
        n = int(np.prod(shape))
        payload = [np.frombuffer(fh.read(8 * n), dtype="<f8").reshape(shape) for _ in range(count)]
    header = {"version": version, "d": d, "R": R, "h": h, "seed": seed, "shape": shape}
    try:
        with open(str(path) + ".json") as fh:
            side = json.load(fh)
        alphas = [tuple(a) for a in side["arrays"]]
    except FileNotFoundError:
        alphas = list(range(count))
    return header, dict(zip(alphas, payload))


def realization_from_arrays(domain: BoxDomain, h: float, arrays: Mapping) -> FieldRealization:
    arrays = {tuple(a): np.asarray(v, dtype=float) for a, v in arrays.items()}
    for v in arrays.values():
        if v.shape != domain.grid_shape(h):
            raise GridMismatch("array shape does not match the domain grid")
    return FieldRealization(domain, h, arrays)
