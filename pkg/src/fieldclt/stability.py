"""Stability of a field pair (g, p) on unit cubes of a stratified box.

(g, p) is stable at level l on a face F at x when

    |g(x) - l| >= 2 |p(x)|   or   |grad_F g(x)| >= 2 |grad_F p(x)|,

with only the first clause on vertices.  A cube is stable when this holds at
every point of every face of its closure inside the domain.  On the grid the
infimum over a face is replaced by its grid points; ``margin`` inflates the
perturbation so marginal cubes can be screened out.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .critical_points import count_in_cube, find_critical_points
from .domain import BoxDomain, Stratum
from .errors import GridMismatch
from .sampler import (FieldRealization, add_fields, derive_seed, resample_cubes, sample_field,
                      scale_field)
from .topology import ES, LS, count_interior

SAFETY_MARGIN = 1.25


@dataclass
class StabilityVerdict:
    cube: tuple[int, ...]
    level: float
    stable: bool
    margin: float = 1.0
    witness: dict | None = None


def _arrays(field, d):
    if isinstance(field, FieldRealization):
        return field.arrays
    return {tuple(a): np.asarray(v) for a, v in field.items()}


def _unit(d, i):
    a = [0] * d
    a[i] = 1
    return tuple(a)


def _face_type_violations(g, p, level, S, margin, k):
    """Boolean array of grid points (on faces with free axes S) where both
    clauses fail, plus the four diagnostic magnitudes."""
    d = len(next(iter(g)))
    zero = (0,) * d
    sl = tuple(slice(None) if i in S else slice(None, None, k) for i in range(d))
    gv = np.abs(g[zero][sl] - level)
    pv = np.abs(p[zero][sl])
    bad = gv < 2 * margin * pv
    if S:
        gg = np.sqrt(sum(g[_unit(d, i)][sl] ** 2 for i in S))
        pg = np.sqrt(sum(p[_unit(d, i)][sl] ** 2 for i in S))
        bad &= gg < 2 * margin * pg
    else:
        gg = pg = np.zeros_like(gv)
    # keep only points on open faces: free coordinates must be off the lattice
    for i in S:
        idx = [np.newaxis] * d
        idx[i] = slice(None)
        off_lattice = (np.arange(bad.shape[i]) % k) != 0
        bad &= off_lattice[tuple(idx)]
    return bad, (gv, pv, gg, pg)


def _check_grids(g, p):
    if isinstance(g, FieldRealization) and isinstance(p, FieldRealization):
        if g.domain != p.domain or abs(g.h - p.h) > 1e-15:
            raise GridMismatch("g and p are sampled on different grids")
    ga = _arrays(g, None)
    pa = _arrays(p, None)
    zero = next(iter(ga))
    zero = (0,) * len(zero)
    if ga[zero].shape != pa[zero].shape:
        raise GridMismatch("g and p have different grid shapes")
    return ga, pa


def _unstable_cells(g: FieldRealization, p, domain: BoxDomain, level: float,
                    margin: float, need_witness: bool = False):
    ga, pa = _check_grids(g, p)
    d = domain.dimension
    h = g.h
    k = int(round(1.0 / h))
    lower = np.asarray(domain.lower)
    cubes: set = set()
    witnesses: dict = {}
    for m in range(d + 1):
        for S in itertools.combinations(range(d), m):
            bad, mags = _face_type_violations(ga, pa, level, S, margin, k)
            idx = np.argwhere(bad)
            if idx.size == 0:
                continue
            coords = np.empty(idx.shape)
            for i in range(d):
                step = h if i in S else 1.0
                coords[:, i] = lower[i] + idx[:, i] * step
            anchors = np.floor(coords + 1e-12).astype(np.int64)
            fixed = [i for i in range(d) if i not in S]
            for offs in itertools.product((-1, 0), repeat=len(fixed)):
                vs = anchors.copy()
                for i, o in zip(fixed, offs):
                    vs[:, i] += o
                inside = np.all((vs >= lower) & (vs < np.asarray(domain.upper)), axis=1)
                for row, ok, pt, c in zip(vs, inside, idx, coords):
                    if not ok:
                        continue
                    v = tuple(int(a) for a in row)
                    if v not in cubes:
                        cubes.add(v)
                        if need_witness:
                            anchor = tuple(int(a) for a in np.floor(c + 1e-12))
                            witnesses[v] = {
                                "stratum": Stratum(anchor, S),
                                "point": tuple(float(a) for a in c),
                                "g_minus_level": float(mags[0][tuple(pt)]),
                                "p": float(mags[1][tuple(pt)]),
                                "grad_g": float(mags[2][tuple(pt)]),
                                "grad_p": float(mags[3][tuple(pt)]),
                            }
    return cubes, witnesses


def check_stability(g: FieldRealization, p, cube, domain: BoxDomain | None = None,
                    level: float = 0.0, margin: float = 1.0) -> StabilityVerdict:
    """Evaluate the stability predicate on the closed cube intersected with the domain."""
    domain = g.domain if domain is None else domain
    v = tuple(int(c) for c in cube)
    sub = BoxDomain(v, tuple(c + 1 for c in v))
    if not domain.contains_box(sub):
        raise GridMismatch(f"cube {v} is not part of the domain")
    gs = g.restricted(sub)
    ps = p.restricted(sub) if isinstance(p, FieldRealization) else _restrict_arrays(g, p, sub)
    cubes, wit = _unstable_cells(gs, ps, sub, level, margin, need_witness=True)
    if v in cubes:
        return StabilityVerdict(v, level, False, margin, wit[v])
    return StabilityVerdict(v, level, True, margin)


def _restrict_arrays(g, arrays, sub):
    tmp = FieldRealization(g.domain, g.h, _arrays(arrays, g.dimension))
    return tmp.restricted(sub)


def unstable_set(g: FieldRealization, p, domain: BoxDomain | None = None,
                 level: float = 0.0, margin: float = 1.0) -> set:
    """Cubes of the domain on which (g, p) is unstable at the level."""
    domain = g.domain if domain is None else domain
    if domain != g.domain:
        g = g.restricted(domain)
        p = p.restricted(domain) if isinstance(p, FieldRealization) else _restrict_arrays(g, p, domain)
    cubes, _ = _unstable_cells(g, p, domain, level, margin)
    return cubes


def is_stable(g, p, domain=None, level=0.0, margin=1.0) -> bool:
    return not unstable_set(g, p, domain, level, margin)


def decay_profile(unstable_counts: dict, trials: int) -> list[tuple[float, float]]:
    """(distance, probability) pairs from per-distance unstable tallies."""
    return [(r, c / trials) for r, c in sorted(unstable_counts.items())]


def _bounding_box(cubes, domain: BoxDomain) -> BoxDomain:
    arr = np.asarray(sorted(cubes))
    lo = np.maximum(arr.min(axis=0), domain.lower)
    hi = np.minimum(arr.max(axis=0) + 1, domain.upper)
    return BoxDomain(tuple(int(a) for a in lo), tuple(int(b) for b in hi))


def perturbation_audit(g: FieldRealization, p: FieldRealization, domain: BoxDomain | None = None,
                       level: float = 0.0, margin: float = SAFETY_MARGIN,
                       kinds=(ES, LS)) -> dict:
    """Check count invariance on stable pairs and the critical-point bound otherwise.

    With U the cubes where (g, p) is unstable (with the safety margin), the
    count change must vanish when U is empty and is otherwise at most the
    number of stratified critical points of g and g + p in the cubes of U.
    """
    domain = g.domain if domain is None else domain
    if domain != g.domain:
        g = g.restricted(domain)
        p = p.restricted(domain)
    gp = add_fields(g, p)
    U = unstable_set(g, p, domain, level, margin)
    change = {kind: count_interior(gp, None, level, kind) - count_interior(g, None, level, kind)
              for kind in kinds}
    bound = 0
    if U:
        box = _bounding_box(U, domain)
        cps_g = find_critical_points(g, domain=box)
        cps_gp = find_critical_points(gp, domain=box)
        bound = sum(count_in_cube(cps_g, v) + count_in_cube(cps_gp, v) for v in U)
    invariance_ok = {k: (not U) <= (c == 0) for k, c in change.items()}
    bound_ok = {k: abs(c) <= bound for k, c in change.items()}
    return {"unstable_cubes": len(U), "stable": not U, "change": change, "bound": bound,
            "invariance_ok": invariance_ok, "bound_ok": bound_ok,
            "ok": all(invariance_ok.values()) and all(bound_ok.values())}


def stability_audit(kernel, R: int = 4, h: float = 0.25, trials: int = 200, seed: int = 0,
                    level: float = 0.0, scales=(1.0, 0.1, 0.01), margin: float = SAFETY_MARGIN,
                    kinds=(ES, LS), oversample: int = 4) -> dict:
    """Perturbation trials with p a scaled resampling of the central cube.

    Fields are evaluated on a grid of spacing h / oversample (same noise
    cells): the invariance being audited is a statement about the field, and
    at spacing h a thin neck can open or close between grid nodes under a
    perturbation far too small to change the true topology.
    """
    d = kernel.dimension
    D = BoxDomain.cube(R, d)
    rows = []
    for t in range(trials):
        s = derive_seed(seed, 31, t)
        g = sample_field(kernel, D, h, seed=s, max_order=2, oversample=oversample)
        _, p = resample_cubes(g, [(0,) * d], derive_seed(s, 1))
        for scale in scales:
            res = perturbation_audit(g, scale_field(p, scale), D, level, margin, kinds)
            res.update(trial=t, scale=scale)
            rows.append(res)
    stable = [r for r in rows if r["stable"]]
    return {"rows": rows, "trials": len(rows), "stable_trials": len(stable),
            "invariance_violations": sum(not all(r["invariance_ok"].values()) for r in rows),
            "bound_violations": sum(not all(r["bound_ok"].values()) for r in rows)}


def unstable_profile(kernel, R: int = 8, h: float = 0.25, trials: int = 1000, seed: int = 0,
                     level: float = 0.0, margin: float = 1.0) -> dict:
    """P(v in U_0) by distance |v| for p = the change from resampling cube 0."""
    d = kernel.dimension
    D = BoxDomain.cube(R, d)
    cubes = np.asarray(D.cubes())
    dist = np.round(np.linalg.norm(cubes, axis=1)).astype(int)
    per_bin = {int(r): int(np.count_nonzero(dist == r)) for r in np.unique(dist)}
    hits = {r: 0 for r in per_bin}
    for t in range(trials):
        s = derive_seed(seed, 37, t)
        g = sample_field(kernel, D, h, seed=s, max_order=1)
        _, p = resample_cubes(g, [(0,) * d], derive_seed(s, 1))
        for v in unstable_set(g, p, D, level, margin):
            hits[int(round(float(np.linalg.norm(v))))] += 1
    prob = {r: hits[r] / (trials * per_bin[r]) for r in per_bin}
    return {"distance": sorted(prob), "probability": [prob[r] for r in sorted(prob)],
            "trials": trials}


def profile_slope(profile: dict, r_min: float = 2, r_max: float = 6) -> float:
    """Log-log slope of the unstable probability over a distance range (-inf once it hits 0)."""
    r = np.asarray(profile["distance"], dtype=float)
    pr = np.asarray(profile["probability"], dtype=float)
    sel = (r >= r_min) & (r <= r_max)
    if np.any(pr[sel] == 0):
        return -math.inf
    return float(np.polyfit(np.log(r[sel]), np.log(pr[sel]), 1)[0])
