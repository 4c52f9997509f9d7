"""Monte Carlo experiments on component counts of smooth Gaussian fields.

Every trial draws its own white noise from ``derive_seed(base_seed, ...)``, so
results depend only on the arguments and not on evaluation order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .critical_points import find_critical_points
from .domain import BoxDomain
from .errors import WindowTooSmall
from .kac_rice import expected_critical_count
from .kernels import CovarianceOracle, KernelSpec
from .sampler import (GAUSSIAN_LAW, WhiteNoiseGrid, add_fields, derive_seed, half_space_freeze,
                      injected_field, noise_extent, redraw_free, resample_cubes, sample_field)
from .stats import (bootstrap_ci, fsum_mean, mean_se, moment_slope, normality, sample_variance,
                    variance_se)
from .topology import ES, LS, count_interior, count_level_components

# stream tags keep the per-purpose seed trees apart
_COUNT, _OUTER, _INNER, _RESAMPLE, _PROBE, _ZEROS, _CRIT = range(7)


@dataclass
class MCEstimate:
    mean: float
    std_error: float
    trials: int
    base_seed: int
    metadata: dict = field(default_factory=dict)
    values: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def from_values(cls, values, base_seed: int, **metadata) -> "MCEstimate":
        values = np.asarray(values, dtype=float)
        m, se = mean_se(values)
        return cls(m, se, int(values.size), int(base_seed), metadata, values)

    def ci(self, z: float = 1.96) -> tuple[float, float]:
        return self.mean - z * self.std_error, self.mean + z * self.std_error

    def as_dict(self) -> dict:
        return {"mean": self.mean, "std_error": self.std_error, "trials": self.trials,
                "base_seed": self.base_seed, "metadata": self.metadata}


@dataclass
class SigmaEstimate:
    sigma_squared: float
    std_error: float
    inner_trials: int
    outer_trials: int
    window: int
    products: np.ndarray = field(repr=False, default=None)
    delta_mean: float = 0.0
    delta_se: float = 0.0
    metadata: dict = field(default_factory=dict)

    def ci(self, z: float = 1.96) -> tuple[float, float]:
        return self.sigma_squared - z * self.std_error, self.sigma_squared + z * self.std_error

    def as_dict(self) -> dict:
        return {"sigma_squared": self.sigma_squared, "std_error": self.std_error,
                "inner_trials": self.inner_trials, "outer_trials": self.outer_trials,
                "window": self.window, "delta_mean": self.delta_mean,
                "delta_se": self.delta_se, "metadata": self.metadata}


def _count(real, level, kind, domain=None) -> int:
    return count_interior(real, domain, level, kind)


def _sample(kernel, R, h, seed, max_order=0):
    return sample_field(kernel, BoxDomain.cube(R, kernel.dimension), h, seed=seed,
                        max_order=max_order)


def trial_seeds(seed: int, R: int, trials: int) -> list[int]:
    """Per-trial seeds used by the count experiments at window R."""
    return [derive_seed(seed, _COUNT, R, i) for i in range(trials)]


def count_samples(kernel: KernelSpec, levels, kind: str, R: int, h: float, trials: int,
                  seed: int, seeds=None) -> np.ndarray:
    """Interior component counts, shape (trials, len(levels)), on shared samples.

    Explicit ``seeds`` override the derived ones (and fix the trial count).
    """
    levels = np.atleast_1d(np.asarray(levels, dtype=float))
    seeds = trial_seeds(seed, R, trials) if seeds is None else list(seeds)
    out = np.zeros((len(seeds), levels.size), dtype=np.int64)
    for i, s in enumerate(seeds):
        real = _sample(kernel, R, h, s)
        for j, lvl in enumerate(levels):
            out[i, j] = _count(real, float(lvl), kind)
    return out


def estimate_density(kernel: KernelSpec, level: float, kind: str = ES, R: int = 16,
                     h: float = 0.25, trials: int = 100, seed: int = 0,
                     seeds=None) -> MCEstimate:
    """Interior component count per unit volume."""
    if R < 2:
        raise ValueError("R must be at least 2")
    counts = count_samples(kernel, [level], kind, R, h, trials, seed, seeds)[:, 0]
    vol = (2 * R) ** kernel.dimension
    return MCEstimate.from_values(counts / vol, seed, quantity="density", kind=kind,
                                  level=level, R=R, h=h)


def level_scan(kernel: KernelSpec, levels, kind: str = ES, R: int = 16, h: float = 0.25,
               trials: int = 100, seed: int = 0) -> list[MCEstimate]:
    """Densities at several levels from the same field samples."""
    counts = count_samples(kernel, levels, kind, R, h, trials, seed)
    vol = (2 * R) ** kernel.dimension
    return [MCEstimate.from_values(counts[:, j] / vol, seed, quantity="density", kind=kind,
                                   level=float(lvl), R=R, h=h)
            for j, lvl in enumerate(levels)]


def critical_density_above(kernel: KernelSpec, levels, R: int = 8, h: float = 0.25,
                           trials: int = 50, seed: int = 0) -> list[MCEstimate]:
    """Ordinary critical points per unit volume with level at least each given level."""
    vol = (2 * R) ** kernel.dimension
    rows = np.zeros((trials, len(levels)))
    for i in range(trials):
        real = _sample(kernel, R, h, derive_seed(seed, _CRIT, R, i), max_order=2)
        cps = find_critical_points(real, dims=(kernel.dimension,))
        lv = np.array([r.level for r in cps])
        rows[i] = [np.count_nonzero(lv >= lvl) for lvl in levels]
    return [MCEstimate.from_values(rows[:, j] / vol, seed, quantity="critical_above",
                                   level=float(lvl), R=R, h=h)
            for j, lvl in enumerate(levels)]


def variance_ratio(counts, volume: float, n_boot: int = 1000, seed: int = 0) -> dict:
    counts = np.asarray(counts, dtype=float)
    var = sample_variance(counts)
    lo, hi = bootstrap_ci(counts, lambda s: np.var(s, ddof=1), n_boot, seed=seed)
    return {"ratio": var / volume, "ci": (lo / volume, hi / volume),
            "std_error": variance_se(counts) / volume, "mean": fsum_mean(counts),
            "trials": int(counts.size)}


def variance_scaling(kernel: KernelSpec, level: float, kind: str = ES, R_list=(8, 16, 32),
                     h: float = 0.25, trials: int = 200, seed: int = 0,
                     n_boot: int = 1000) -> list[dict]:
    """Var[N] / (2R)^d with bootstrap intervals for each R."""
    R_list = list(R_list)
    if len(R_list) < 3 or R_list != sorted(R_list):
        raise ValueError("need at least three increasing window sizes")
    rows = []
    for R in R_list:
        counts = count_samples(kernel, [level], kind, R, h, trials, seed)[:, 0]
        row = variance_ratio(counts, (2 * R) ** kernel.dimension, n_boot, seed)
        row.update(R=R, counts=counts)
        rows.append(row)
    return rows


def clt_normality_test(kernel: KernelSpec, level: float, kind: str = ES, R: int = 32,
                       h: float = 0.25, trials: int = 1000, seed: int = 0,
                       counts=None) -> dict:
    """Skewness, excess kurtosis and KS fit of the standardised count."""
    if counts is None:
        if trials < 1000:
            raise ValueError("normality testing needs at least 1000 trials")
        counts = count_samples(kernel, [level], kind, R, h, trials, seed)[:, 0]
    rep = normality(counts)
    return {"R": R, "level": level, "kind": kind, "h": h, "trials": int(len(counts)),
            **rep.as_dict(), "counts": np.asarray(counts)}


def sigma_window(kernel: KernelSpec, R_win: int, h: float):
    d = kernel.dimension
    if R_win < kernel.truncation_radius + 2:
        raise WindowTooSmall(f"window {R_win} is smaller than the kernel range + 2")
    D = BoxDomain.cube(R_win, d)
    ext = noise_extent(kernel, D, h)
    return D, ext


def estimate_sigma_resampling(kernel: KernelSpec, level: float, kind: str = ES,
                              R_win: int = 12, h: float = 0.25, outer_trials: int = 400,
                              inner_trials: int = 50, seed: int = 0, pivot=None,
                              noise_law: str = GAUSSIAN_LAW) -> SigmaEstimate:
    """E[E[Delta_0 | F_0]^2] from two independent inner means per outer draw.

    Outer draws fix the noise on cubes lexicographically at or before the
    pivot.  Each inner draw refreshes the later cubes, then compares the count
    with the count after resampling the pivot cube.  The product A * B of the
    two inner means is unbiased for the squared conditional mean, so it may be
    negative on single draws and is never clamped.
    """
    d = kernel.dimension
    pivot = (0,) * d if pivot is None else tuple(pivot)
    D, ext = sigma_window(kernel, R_win, h)
    _, free = half_space_freeze(ext.cubes(), pivot)
    free_mask = WhiteNoiseGrid.zeros(ext, h).cube_mask(free)
    products = np.zeros(outer_trials)
    all_deltas = []
    for o in range(outer_trials):
        base = WhiteNoiseGrid.draw(ext, h, derive_seed(seed, _OUTER, o), noise_law)
        halves = []
        for half in (0, 1):
            deltas = []
            for i in range(inner_trials):
                s = derive_seed(seed, _INNER, o, half, i)
                real = sample_field(kernel, D, h, noise=redraw_free(base, free_mask, s),
                                    max_order=0)
                alt = resample_cubes(real, [pivot], derive_seed(s, _RESAMPLE),
                                     return_perturbation=False)
                deltas.append(_count(real, level, kind) - _count(alt, level, kind))
            all_deltas.extend(deltas)
            halves.append(fsum_mean(deltas))
        products[o] = halves[0] * halves[1]
    m, se = mean_se(products)
    dm, dse = mean_se(all_deltas)
    return SigmaEstimate(m, se, inner_trials, outer_trials, R_win, products, dm, dse,
                         {"level": level, "kind": kind, "h": h, "pivot": pivot,
                          "seed": seed, "noise_law": noise_law})


def stabilization_probe(kernel: KernelSpec, level: float, kind: str = ES, R_list=(4, 6, 8, 12),
                        h: float = 0.25, trials: int = 200, seed: int = 0, pivot=None,
                        same_resample: bool = False) -> dict:
    """Fraction of trials where Delta_0 in window R differs from the largest window.

    ``same_resample`` redraws the pivot cube with its original weights, which
    must give Delta = 0 identically.
    """
    d = kernel.dimension
    R_list = sorted(R_list)
    pivot = (0,) * d if pivot is None else tuple(pivot)
    Rmax = R_list[-1]
    D = BoxDomain.cube(Rmax, d)
    deltas = np.zeros((trials, len(R_list)), dtype=np.int64)
    for t in range(trials):
        s = derive_seed(seed, _PROBE, t)
        real = sample_field(kernel, D, h, seed=s, max_order=0)
        if same_resample:
            alt = real
        else:
            alt = resample_cubes(real, [pivot], derive_seed(s, _RESAMPLE),
                                 return_perturbation=False)
        for j, R in enumerate(R_list):
            sub = BoxDomain.cube(R, d)
            deltas[t, j] = _count(real, level, kind, sub) - _count(alt, level, kind, sub)
    differs = deltas != deltas[:, -1:]
    return {"R": R_list, "fraction_differs": differs.mean(axis=0).tolist(),
            "delta_mean": deltas.mean(axis=0).tolist(), "deltas": deltas, "trials": trials}


def quantity_samples(kernel: KernelSpec, quantity: str, R: int, h: float, trials: int,
                     seed: int, level: float = 0.0) -> np.ndarray:
    """Per-trial values of N_c (ordinary critical points), N_ES or N_LS on the window."""
    out = np.zeros(trials)
    order = 2 if quantity == "N_c" else 0
    for i in range(trials):
        real = _sample(kernel, R, h, derive_seed(seed, _COUNT, R, i, 17), max_order=order)
        if quantity == "N_c":
            out[i] = len(find_critical_points(real, dims=(kernel.dimension,)))
        elif quantity == "N_ES":
            out[i] = _count(real, level, ES)
        elif quantity == "N_LS":
            out[i] = _count(real, level, LS)
        else:
            raise ValueError(f"unknown quantity {quantity!r}")
    return out


def moment_growth(kernel: KernelSpec, quantity: str, powers=(1, 2, 3), R_list=(2, 4, 8, 16),
                  trials=100, seed: int = 0, h: float = 0.25, level: float = 0.0,
                  n_boot: int = 1000) -> dict:
    """Log-log slopes of E[quantity^k] against R.

    ``trials`` may be an int or a mapping from R to a trial count.
    """
    samples = {}
    for R in R_list:
        n = trials[R] if isinstance(trials, dict) else trials
        samples[R] = quantity_samples(kernel, quantity, R, h, n, seed, level)
    fits = {k: moment_slope(samples, k, n_boot, seed=seed) for k in powers}
    return {"quantity": quantity, "level": level, "h": h, "fits": fits, "samples": samples}


def kac_rice_consistency(kernel: KernelSpec, R: int = 4, h: float = 0.25, trials: int = 200,
                         seed: int = 0, mc_samples: int = 400000) -> dict:
    """Expected ordinary critical count from the one-point formula against simulation."""
    oracle = CovarianceOracle(kernel)
    expected, expected_se = expected_critical_count(oracle, R, mc_samples=mc_samples, seed=seed)
    vals = quantity_samples(kernel, "N_c", R, h, trials, seed)
    m, se = mean_se(vals)
    combined = math.hypot(se, expected_se)
    return {"R": R, "expected": expected, "expected_se": expected_se, "mc_mean": m, "mc_se": se,
            "z": (m - expected) / combined if combined > 0 else math.inf,
            "agree": abs(m - expected) <= 3 * combined}


def count_zeros_mc(kernel: KernelSpec, R: float, p=None, trials: int = 1000,
                   h: float = 1 / 16, seed: int = 0) -> dict:
    """Moments of the number of zeros of f + p in [0, R] by simulation."""
    D = BoxDomain((0,), (int(R),))
    shift = None if p is None else injected_field(D, h, p, max_order=1)
    counts = np.zeros(trials)
    for i in range(trials):
        real = sample_field(kernel, D, h, seed=derive_seed(seed, _ZEROS, i), max_order=1)
        if shift is not None:
            real = add_fields(real, shift)
        counts[i] = count_level_components(real, level=0.0, refine=True).total
    m1, se1 = mean_se(counts)
    m2, se2 = mean_se(counts ** 2)
    return {"first_moment": m1, "first_moment_se": se1, "second_moment": m2,
            "second_moment_se": se2, "trials": trials, "h": h, "counts": counts}
