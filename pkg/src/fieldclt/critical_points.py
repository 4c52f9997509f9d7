"""Stratified critical points of a sampled field on a box.

The box is split into open faces of the unit lattice.  On a face with free
axes S the within-face gradient is the S-part of the ambient gradient.  Grid
cells of each face where every gradient component changes sign are refined by
damped Newton iterations on the exact field (the discretised field is a finite
smooth sum, so its derivatives are available at any point).  Lattice vertices
are critical by convention.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .domain import BoxDomain, Stratum
from .errors import GridMismatch, MissingDerivatives
from .sampler import FieldRealization, add_fields

NEWTON_TOL = 1e-10
STALL_TOL = 1e-6
# refined roots agree to ~1e-12, so anything closer than this is the same root
DEDUP_RADIUS = 1e-6


@dataclass(frozen=True)
class CriticalPointRecord:
    location: tuple[float, ...]
    stratum_dim: int
    level: float
    signature: tuple[int, int]  # (negative, positive) eigenvalues of the face Hessian
    free_axes: tuple[int, ...] = ()
    refined: bool = True

    @property
    def index(self) -> int:
        return self.signature[0]

    def stratum(self) -> Stratum:
        anchor = tuple(int(np.floor(x)) if i in self.free_axes else int(round(x))
                       for i, x in enumerate(self.location))
        return Stratum(anchor, self.free_axes)


@dataclass
class CriticalPointSet:
    """Sorted records plus diagnostics from the search."""

    records: list[CriticalPointRecord]
    close_pairs: list[tuple[int, int]] = field(default_factory=list)
    unrefined: int = 0
    candidates: int = 0

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def of_dim(self, m: int) -> list[CriticalPointRecord]:
        return [r for r in self.records if r.stratum_dim == m]

    def locations(self, m: int | None = None) -> np.ndarray:
        recs = self.records if m is None else self.of_dim(m)
        if not recs:
            d = len(self.records[0].location) if self.records else 0
            return np.zeros((0, d))
        return np.array([r.location for r in recs])


def _unit(d, i, j=None):
    a = [0] * d
    a[i] += 1
    if j is not None:
        a[j] += 1
    return tuple(a)


def _face_alphas(d, S):
    grad = [_unit(d, i) for i in S]
    hess = [_unit(d, S[a], S[b]) for a in range(len(S)) for b in range(a, len(S))]
    return grad, hess


def _unpack_hessian(vals, m):
    H = np.empty((vals.shape[0], m, m))
    k = 0
    for a in range(m):
        for b in range(a, m):
            H[:, a, b] = vals[:, k]
            H[:, b, a] = vals[:, k]
            k += 1
    return H


def _candidates(g: FieldRealization, S, k, slack: float = 0.5):
    """Centres of face cells where each S-gradient component may vanish.

    A component qualifies when the interval spanned by its corner values
    contains 0.  Where the component is not monotone across the cell the
    interval is widened by ``slack * h`` times its largest corner derivative,
    which catches pairs of roots hidden between corners of equal sign.
    """
    d = g.dimension
    m = len(S)
    sl = tuple(slice(None) if i in S else slice(None, None, k) for i in range(d))

    def cell_reduce(arr, op):
        for ax in S:
            n = arr.shape[ax]
            lo = [slice(None)] * d
            hi = [slice(None)] * d
            lo[ax] = slice(0, n - 1)
            hi[ax] = slice(1, n)
            arr = op(arr[tuple(lo)], arr[tuple(hi)])
        return arr

    cand = None
    for i in S:
        comp = g[_unit(d, i)][sl]
        mn = cell_reduce(comp, np.minimum)
        mx = cell_reduce(comp, np.maximum)
        # a component monotone along every axis of the cell takes its extremes
        # at the corners; otherwise widen its range by the derivative bound
        wiggle = np.zeros(mn.shape, dtype=bool)
        dmax = np.zeros(mn.shape)
        for j in S:
            dj = g[_unit(d, i, j)][sl]
            wiggle |= (cell_reduce(dj, np.minimum) < 0) & (cell_reduce(dj, np.maximum) > 0)
            dmax = np.maximum(dmax, cell_reduce(np.abs(dj), np.maximum))
        pad = np.where(wiggle, slack * g.h * dmax, 0.0)
        c = (mn - pad <= 0) & (mx + pad >= 0)
        cand = c if cand is None else cand & c
    # mixed signs of the face Hessian determinant mark a possible fold, where
    # two roots may share one cell
    H = np.empty(g.values[sl].shape + (m, m))
    for a in range(m):
        for b in range(m):
            H[..., a, b] = g[_unit(d, S[a], S[b])][sl]
    det = np.linalg.det(H) if m > 1 else H[..., 0, 0]
    fold = (cell_reduce(det, np.minimum) <= 0) & (cell_reduce(det, np.maximum) >= 0)
    idx = np.argwhere(cand)
    fold = fold[cand]
    lower = np.asarray(g.domain.lower, dtype=float)
    pts = np.empty(idx.shape)
    for i in range(d):
        if i in S:
            pts[:, i] = lower[i] + (idx[:, i] + 0.5) * g.h
        else:
            pts[:, i] = lower[i] + idx[:, i]
    return pts, fold


def _newton(g, x0, S, grad_a, hess_a, tol, max_iter, h):
    """Batched damped Newton restricted to the free axes S."""
    n, m = x0.shape[0], len(S)
    x = x0.copy()
    alphas = grad_a + hess_a
    vals = g.evaluate(x, alphas)
    grad, H = vals[:, :m], _unpack_hessian(vals[:, m:], m)
    norm = np.linalg.norm(grad, axis=1)
    radius = np.full(n, h)
    active = norm >= tol
    lo = np.asarray(g.domain.lower, dtype=float)
    hi = np.asarray(g.domain.upper, dtype=float)
    for _ in range(max_iter):
        ids = np.nonzero(active)[0]
        if ids.size == 0:
            break
        Hs, gs = H[ids], grad[ids]
        try:
            step = -np.linalg.solve(Hs, gs[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = np.stack([-np.linalg.lstsq(Hi, gi, rcond=None)[0] for Hi, gi in zip(Hs, gs)])
        length = np.linalg.norm(step, axis=1)
        scale = np.minimum(1.0, radius[ids] / np.maximum(length, 1e-300))
        trial = x[ids].copy()
        trial[:, S] += step * scale[:, None]
        trial = np.clip(trial, lo, hi)
        tv = g.evaluate(trial, alphas)
        tg = tv[:, :m]
        tn = np.linalg.norm(tg, axis=1)
        better = tn < norm[ids]
        acc = ids[better]
        x[acc] = trial[better]
        grad[acc] = tg[better]
        H[acc] = _unpack_hessian(tv[better, m:], m)
        norm[acc] = tn[better]
        radius[acc] = np.minimum(2 * radius[acc], 1.0)
        rej = ids[~better]
        radius[rej] *= 0.25
        active = (norm >= tol) & (radius > 1e-9)
    return x, norm < tol, norm


def _search_faces(g, S, k, grad_a, hess_a, tol, max_iter):
    """Roots of the S-gradient on every face with free axes S."""
    h = g.h
    m = len(S)
    cand, fold = _candidates(g, S, k)
    if len(cand) == 0:
        return np.zeros((0, g.dimension)), np.zeros(0, dtype=bool), 0, 0
    # fold cells get extra starts at their sub-cell centres
    starts = [cand]
    for corner in itertools.product((-0.25, 0.25), repeat=m):
        sub = cand[fold].copy()
        sub[:, S] += np.asarray(corner) * h
        starts.append(sub)
    fold_all = np.concatenate([fold] + [np.ones(int(fold.sum()), dtype=bool)] * 2 ** m)
    cand = np.concatenate(starts)
    x, ok, norm = _newton(g, cand, S, grad_a, hess_a, tol, max_iter, h)
    anchor = np.floor(cand[:, S])
    keep = ok & _on_face(x, S, anchor)

    # a centre start that escapes its face is retried from the sub-cell centres
    n0 = len(fold)
    lost = np.nonzero(~keep[:n0] & ~fold)[0]
    if lost.size:
        r_starts = []
        for corner in itertools.product((-0.25, 0.25), repeat=m):
            sub = cand[lost].copy()
            sub[:, S] += np.asarray(corner) * h
            r_starts.append(sub)
        rs = np.concatenate(r_starts)
        x2, ok2, n2 = _newton(g, rs, S, grad_a, hess_a, tol, max_iter, h)
        good = ok2 & _on_face(x2, S, np.floor(rs[:, S]))
        if good.any():
            x = np.concatenate([x, x2[good]])
            ok = np.concatenate([ok, ok2[good]])
            keep = np.concatenate([keep, np.ones(int(good.sum()), dtype=bool)])
            cand = np.concatenate([cand, rs[good]])
            norm = np.concatenate([norm, n2[good]])
            fold_all = np.concatenate([fold_all, np.zeros(int(good.sum()), dtype=bool)])
            anchor = np.floor(cand[:, S])

    # near a fold the partner root lies along the softest Hessian direction
    near = np.nonzero(keep & fold_all)[0]
    if near.size:
        H = _unpack_hessian(g.evaluate(x[near], hess_a), m)
        lam, vec = np.linalg.eigh(H)
        soft = np.abs(lam[:, 0]) <= np.abs(lam[:, -1])
        j = np.where(soft, 0, m - 1)
        small = np.abs(lam[np.arange(near.size), j]) < 4 * h
        near, v = near[small], vec[small, :, j[small]]
        if near.size:
            p_starts, p_anchor = [], []
            for delta in (h / 8, h / 4, h / 2):
                for sign in (-1.0, 1.0):
                    st = x[near].copy()
                    st[:, S] += sign * delta * v
                    p_starts.append(st)
                    p_anchor.append(anchor[near])
            ps = np.concatenate(p_starts)
            pa = np.concatenate(p_anchor)
            x2, ok2, _ = _newton(g, ps, S, grad_a, hess_a, tol, max_iter, h)
            good = ok2 & _on_face(x2, S, pa)
            x = np.concatenate([x, x2[good]])
            ok = np.concatenate([ok, ok2[good]])
            keep = np.concatenate([keep, np.ones(int(good.sum()), dtype=bool)])
            cand = np.concatenate([cand, ps[good]])
            norm = np.concatenate([norm, np.zeros(int(good.sum()))])

    # a stall at a clearly nonzero minimum of |grad| means no root;
    # only ambiguous stalls are kept as unrefined cell centres
    failed = np.nonzero(~ok)[0]
    ambiguous = failed[norm[failed] < STALL_TOL]
    x[ambiguous] = cand[ambiguous]
    keep[ambiguous] = True
    return x[keep], ok[keep], int(ambiguous.size), len(cand)


def _on_face(x, S, anchor):
    """Inside the closed unit face with the given anchor along S."""
    return np.all((x[:, S] >= anchor - 1e-9) & (x[:, S] <= anchor + 1 + 1e-9), axis=1)


def find_critical_points(real: FieldRealization, p: FieldRealization | None = None,
                         domain: BoxDomain | None = None, newton_tol: float = NEWTON_TOL,
                         dedup_radius: float | None = None, dims=None,
                         max_iter: int = 60) -> CriticalPointSet:
    """Stratified critical points of real (+ p) on the domain.

    ``dims`` restricts the search to faces of the given dimensions; the
    default is every dimension 0..d.  Records are sorted by face dimension and
    then lexicographically by location.
    """
    g = real if p is None else add_fields(real, p)
    if domain is not None and domain != g.domain:
        g = g.restricted(domain)
    d = g.dimension
    g.require(2)
    if g.evaluator is None:
        raise MissingDerivatives("critical point refinement needs a point evaluator")
    h = g.h
    k = int(round(1.0 / h))
    if abs(k * h - 1.0) > 1e-9:
        raise GridMismatch("grid spacing must divide the unit lattice")
    dedup = DEDUP_RADIUS if dedup_radius is None else dedup_radius
    dims = tuple(range(d + 1)) if dims is None else tuple(dims)
    records: list[CriticalPointRecord] = []
    n_unrefined = 0
    n_cand = 0
    zero = (0,) * d

    if 0 in dims:
        for anchor in itertools.product(*[range(a, b + 1) for a, b in
                                          zip(g.domain.lower, g.domain.upper)]):
            idx = tuple((a - lo) * k for a, lo in zip(anchor, g.domain.lower))
            records.append(CriticalPointRecord(tuple(float(a) for a in anchor), 0,
                                               float(g.values[idx]), (0, 0), ()))

    for m in sorted(x for x in dims if x >= 1):
        for S in itertools.combinations(range(d), m):
            S = list(S)
            grad_a, hess_a = _face_alphas(d, S)
            pts, refined, nu, nc = _search_faces(g, S, k, grad_a, hess_a, newton_tol, max_iter)
            n_unrefined += nu
            n_cand += nc
            if len(pts) == 0:
                continue
            pts, refined = _dedup(pts, refined, dedup)
            vals = g.evaluate(pts, [zero] + hess_a)
            Hs = _unpack_hessian(vals[:, 1:], m)
            eig = np.linalg.eigvalsh(Hs)
            for j in range(len(pts)):
                sig = (int(np.sum(eig[j] < 0)), int(np.sum(eig[j] > 0)))
                records.append(CriticalPointRecord(tuple(float(v) for v in pts[j]), m,
                                                   float(vals[j, 0]), sig, tuple(S),
                                                   bool(refined[j])))

    records.sort(key=lambda r: (r.stratum_dim, r.free_axes, r.location))
    # distinct roots within two grid steps are reported for review
    close = _close_pairs(records, 2 * h)
    return CriticalPointSet(records, close, n_unrefined, n_cand)


def _dedup(pts, refined, radius):
    order = np.lexsort(pts.T[::-1])
    pts, refined = pts[order], refined[order]
    tree = cKDTree(pts)
    drop = np.zeros(len(pts), dtype=bool)
    for i, j in sorted(tree.query_pairs(radius)):
        if not drop[i]:
            drop[j] = True
    return pts[~drop], refined[~drop]


def _close_pairs(records, radius):
    if len(records) < 2:
        return []
    out = []
    by_face: dict = {}
    for i, r in enumerate(records):
        if r.stratum_dim:
            by_face.setdefault(r.free_axes, []).append(i)
    for ids in by_face.values():
        if len(ids) < 2:
            continue
        tree = cKDTree(np.array([records[i].location for i in ids]))
        out.extend((ids[a], ids[b]) for a, b in sorted(tree.query_pairs(radius)))
    return out


# ---------------------------------------------------------------------------
# counting helpers

def count_critical_points_above(records, level: float) -> int:
    return sum(1 for r in records if r.level >= level)


def records_in_cube(records, v, tol: float = 1e-12) -> list[CriticalPointRecord]:
    """Records lying in the closed unit cube v + [0,1]^d."""
    v = np.asarray(v, dtype=float)
    out = []
    for r in records:
        x = np.asarray(r.location)
        if np.all(x >= v - tol) and np.all(x <= v + 1 + tol):
            out.append(r)
    return out


def count_in_cube(records, v) -> int:
    return len(records_in_cube(records, v))


def interior_critical_count(real: FieldRealization, domain: BoxDomain | None = None,
                            level: float | None = None) -> int:
    """Ordinary (top-dimensional) critical points, optionally above a level."""
    cps = find_critical_points(real, domain=domain, dims=(real.dimension,))
    if level is None:
        return len(cps)
    return count_critical_points_above(cps, level)
