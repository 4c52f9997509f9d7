"""Small statistical helpers shared by the experiment harness."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats


def fsum_mean(values) -> float:
    """Mean with exact (order-independent) summation."""
    values = list(map(float, values))
    return math.fsum(values) / len(values)


def mean_se(values) -> tuple[float, float]:
    """Sample mean and its standard error sample_std / sqrt(n)."""
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two values")
    m = fsum_mean(x)
    var = math.fsum((x - m) ** 2) / (x.size - 1)
    return m, math.sqrt(var / x.size)


def sample_variance(values) -> float:
    x = np.asarray(values, dtype=float)
    m = fsum_mean(x)
    return math.fsum((x - m) ** 2) / (x.size - 1)


def bootstrap_ci(values, statistic=np.mean, n_boot: int = 1000, alpha: float = 0.05,
                 seed: int = 0) -> tuple[float, float]:
    """Percentile bootstrap interval for a statistic of one sample."""
    x = np.asarray(values, dtype=float)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, x.size, size=(n_boot, x.size))
    reps = np.array([statistic(x[i]) for i in idx])
    lo, hi = np.quantile(reps, [alpha / 2, 1 - alpha / 2])
    return float(lo), float(hi)


def variance_ci(values, n_boot: int = 1000, alpha: float = 0.05, seed: int = 0):
    """Sample variance with a percentile bootstrap interval."""
    x = np.asarray(values, dtype=float)
    lo, hi = bootstrap_ci(x, lambda s: np.var(s, ddof=1), n_boot, alpha, seed)
    return sample_variance(x), lo, hi


def variance_se(values) -> float:
    """Delta-method standard error of the sample variance."""
    x = np.asarray(values, dtype=float)
    n = x.size
    m = x.mean()
    m2 = np.mean((x - m) ** 2)
    m4 = np.mean((x - m) ** 4)
    return math.sqrt(max(m4 - (n - 3) / (n - 1) * m2 ** 2, 0.0) / n)


@dataclass
class NormalityReport:
    n: int
    skewness: float
    excess_kurtosis: float
    ks_statistic: float
    ks_pvalue: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def standardize(values) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    sd = x.std(ddof=1)
    if sd == 0:
        return np.zeros_like(x)
    return (x - x.mean()) / sd


def ks_normal(z) -> tuple[float, float]:
    """KS distance to N(0, 1) and its asymptotic p-value.

    p = Q(sqrt(n) D) with Q(t) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 t^2).
    """
    z = np.asarray(z, dtype=float)
    D = float(stats.kstest(z, "norm").statistic)
    return D, float(special.kolmogorov(math.sqrt(z.size) * D))


def normality(values, seed: int = 0) -> NormalityReport:
    """Skewness, excess kurtosis and a KS test against the normal law.

    Integer-valued samples get seeded Uniform(-1/2, 1/2) jitter before the KS
    step only: the KS null assumes a continuous law, and lattice steps alone
    would reject it once n is in the thousands.
    """
    x = np.asarray(values, dtype=float)
    z = standardize(x)
    if x.size and np.all(x == np.round(x)):
        x = x + np.random.default_rng(seed).uniform(-0.5, 0.5, x.size)
    D, p = ks_normal(standardize(x))
    return NormalityReport(int(z.size), float(stats.skew(z)), float(stats.kurtosis(z)), D, p)


def loglog_fit(xs, ys) -> tuple[float, float]:
    """Least-squares slope and intercept of log y against log x."""
    xs = np.log(np.asarray(xs, dtype=float))
    ys = np.log(np.asarray(ys, dtype=float))
    slope, intercept = np.polyfit(xs, ys, 1)
    return float(slope), float(intercept)


def moment_slope(samples: dict, power: int, n_boot: int = 1000, alpha: float = 0.05,
                 seed: int = 0) -> dict:
    """Slope of log E[X^k] vs log R with a bootstrap interval over trials.

    samples maps R to an array of per-trial values.
    """
    Rs = sorted(samples)
    arrs = [np.asarray(samples[R], dtype=float) for R in Rs]
    moments = [float(np.mean(a ** power)) for a in arrs]
    slope, intercept = loglog_fit(Rs, moments)
    rng = np.random.default_rng(seed)
    reps = []
    for _ in range(n_boot):
        m = [np.mean(a[rng.integers(0, a.size, a.size)] ** power) for a in arrs]
        if min(m) > 0:
            reps.append(loglog_fit(Rs, m)[0])
    lo, hi = np.quantile(reps, [alpha / 2, 1 - alpha / 2])
    ses = [float(np.std(a ** power, ddof=1) / math.sqrt(a.size)) for a in arrs]
    return {"power": power, "R": Rs, "moments": moments, "moment_se": ses, "slope": slope,
            "intercept": intercept, "ci": (float(lo), float(hi))}


def compatible(intervals) -> bool:
    """True when all intervals share a common point."""
    return max(lo for lo, _ in intervals) <= min(hi for _, hi in intervals)
