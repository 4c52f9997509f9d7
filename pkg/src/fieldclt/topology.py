"""Component counts of excursion sets {f >= l} and level sets {f = l} in a box.

Excursion sets are labelled on the grid with face adjacency.  In d = 2 two
diagonal corners of a cell are also joined when the mean of the four corner
values is >= l (the saddle rule).  This is the same disambiguation used for the
level-set contours, which makes both counts consistent: every closed contour
inside the box is the outer boundary of exactly one component of either
{f >= l} or {f < l} that avoids the boundary.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.optimize import brentq
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .domain import BoxDomain
from .errors import DomainNotCovered, UnsupportedDimension

ES = "ES"
LS = "LS"


@dataclass
class ComponentCensus:
    level: float
    kind: str
    count_interior: int
    count_boundary_touching: int
    labels: np.ndarray | None = field(default=None, repr=False)
    interior_ids: np.ndarray | None = field(default=None, repr=False)

    @property
    def total(self) -> int:
        return self.count_interior + self.count_boundary_touching


def _values_on(real, domain: BoxDomain | None) -> np.ndarray:
    if domain is None or domain == real.domain:
        return real.values
    if not real.domain.contains_box(domain):
        raise DomainNotCovered(f"{domain} is not covered by the realization on {real.domain}")
    return real.restricted(domain).values


def _boundary_layer(shape) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    for ax in range(len(shape)):
        idx = [slice(None)] * len(shape)
        idx[ax] = 0
        mask[tuple(idx)] = True
        idx[ax] = -1
        mask[tuple(idx)] = True
    return mask


def _saddle_links(lab: np.ndarray, up: np.ndarray, join: np.ndarray):
    """Label pairs joined across cell diagonals in d = 2.

    ``up`` marks cells of the set being labelled; ``join`` marks cells whose
    saddle rule connects the diagonal of the set.
    """
    a, b = up[:-1, :-1], up[1:, :-1]
    c, d = up[:-1, 1:], up[1:, 1:]
    diag1 = a & d & ~b & ~c & join
    diag2 = b & c & ~a & ~d & join
    i1 = np.nonzero(diag1)
    i2 = np.nonzero(diag2)
    u = np.concatenate([lab[:-1, :-1][i1], lab[1:, :-1][i2]])
    v = np.concatenate([lab[1:, 1:][i1], lab[:-1, 1:][i2]])
    return u, v


def label_components(values: np.ndarray, level: float, upper: bool = True):
    """Label the grid set {g >= level} (upper) or {g < level} (lower).

    Returns (labels, n) with labels merged across saddle diagonals in d = 2.
    """
    mask = values >= level if upper else values < level
    lab, n = ndimage.label(mask)
    if values.ndim != 2 or n == 0:
        return lab, n
    mean = 0.25 * (values[:-1, :-1] + values[1:, :-1] + values[:-1, 1:] + values[1:, 1:])
    join = mean >= level if upper else mean < level
    u, v = _saddle_links(lab, mask, join)
    if u.size == 0:
        return lab, n
    g = coo_matrix((np.ones(u.size), (u, v)), shape=(n + 1, n + 1))
    k, cl = connected_components(g, directed=False)
    # relabel to consecutive ids with background 0
    _, new = np.unique(cl[1:], return_inverse=True)
    remap = np.concatenate([[0], new + 1])
    return remap[lab], int(new.max()) + 1 if n else 0


def _census_from_labels(lab, n, level, kind) -> ComponentCensus:
    border = np.unique(lab[_boundary_layer(lab.shape)])
    border = border[border > 0]
    interior = np.setdiff1d(np.arange(1, n + 1), border)
    return ComponentCensus(level, kind, int(interior.size), int(border.size), lab, interior)


def count_excursion_components(real, domain: BoxDomain | None = None, level: float = 0.0,
                               keep_labels: bool = True) -> ComponentCensus:
    """Components of {f >= level} on the grid; boundary-touching ones are split off."""
    vals = _values_on(real, domain)
    lab, n = label_components(vals, level, upper=True)
    c = _census_from_labels(lab, n, level, ES)
    if not keep_labels:
        c.labels = None
    return c


def count_lower_components(real, domain: BoxDomain | None = None, level: float = 0.0) -> ComponentCensus:
    """Components of {f < level} with the complementary saddle rule."""
    vals = _values_on(real, domain)
    lab, n = label_components(vals, level, upper=False)
    return _census_from_labels(lab, n, level, "lower")


def count_excursion_values(values: np.ndarray, level: float) -> tuple[int, int]:
    """(interior, boundary-touching) for a raw value array."""
    lab, n = label_components(values, level, upper=True)
    border = np.unique(lab[_boundary_layer(lab.shape)])
    nb = int(np.count_nonzero(border))
    return n - nb, nb


# ---------------------------------------------------------------------------
# level sets

def _contour_graph(g: np.ndarray):
    """Marching-squares contour graph of {g = 0} with the cell-mean saddle rule.

    Nodes are grid edges with a sign change; returns (n_nodes, component id per
    node, boolean mask of nodes on the domain boundary).
    """
    s = g >= 0
    n0, n1 = s.shape
    hc = s[:-1, :] != s[1:, :]       # edge (i,j)-(i+1,j)
    vc = s[:, :-1] != s[:, 1:]       # edge (i,j)-(i,j+1)
    nh = int(hc.sum())
    nv = int(vc.sum())
    hid = np.full(hc.shape, -1, dtype=np.int64)
    hid[hc] = np.arange(nh)
    vid = np.full(vc.shape, -1, dtype=np.int64)
    vid[vc] = nh + np.arange(nv)
    n_nodes = nh + nv
    on_boundary = np.zeros(n_nodes, dtype=bool)
    on_boundary[hid[:, 0][hid[:, 0] >= 0]] = True
    on_boundary[hid[:, -1][hid[:, -1] >= 0]] = True
    on_boundary[vid[0, :][vid[0, :] >= 0]] = True
    on_boundary[vid[-1, :][vid[-1, :] >= 0]] = True
    if n_nodes == 0:
        return 0, np.zeros(0, dtype=np.int64), on_boundary
    e0 = hid[:, :-1]
    e2 = hid[:, 1:]
    e3 = vid[:-1, :]
    e1 = vid[1:, :]
    E = np.stack([e0, e1, e2, e3], axis=-1)
    cnt = (E >= 0).sum(axis=-1)
    two = E[cnt == 2]
    pairs = [np.sort(two, axis=1)[:, 2:4]]
    sad = cnt == 4
    if sad.any():
        mean = 0.25 * (g[:-1, :-1] + g[1:, :-1] + g[:-1, 1:] + g[1:, 1:])
        same = (s[:-1, :-1] == (mean >= 0))[sad]
        Es = E[sad]
        # corners matching the centre sign stay connected; cut off the others
        pairs.append(np.where(same[:, None], Es[:, [0, 1]], Es[:, [0, 3]]))
        pairs.append(np.where(same[:, None], Es[:, [2, 3]], Es[:, [1, 2]]))
    P = np.concatenate(pairs)
    graph = coo_matrix((np.ones(len(P)), (P[:, 0], P[:, 1])), shape=(n_nodes, n_nodes))
    _, comp = connected_components(graph, directed=False)
    return n_nodes, comp, on_boundary


def count_level_components(real, domain: BoxDomain | None = None, level: float = 0.0,
                           refine: bool = False) -> ComponentCensus:
    """Components of {f = level} avoiding the boundary.

    d = 1: each sign change of f - level between neighbouring grid points is one
    zero; with ``refine`` the exact field is used to also find pairs of zeros
    hidden between grid points.  d = 2: closed marching-squares contours.
    """
    d = real.dimension
    if d > 2:
        raise UnsupportedDimension("level-set counting supports d <= 2")
    if domain is not None and domain != real.domain:
        if not real.domain.contains_box(domain):
            raise DomainNotCovered(f"{domain} is not covered by the realization")
        real = real.restricted(domain)
    g = real.values - level
    if d == 1:
        n_int, n_bd = _zeros_1d(real, g, level, refine)
        return ComponentCensus(level, LS, n_int, n_bd)
    n_nodes, comp, on_b = _contour_graph(g)
    if n_nodes == 0:
        return ComponentCensus(level, LS, 0, 0)
    n_comp = int(comp.max()) + 1
    bcomp = np.unique(comp[on_b])
    return ComponentCensus(level, LS, n_comp - int(bcomp.size), int(bcomp.size),
                           labels=comp)


def _zeros_1d(real, g, level, refine):
    s = g >= 0
    # an exact zero at an endpoint touches the boundary
    n_bd = int(g[0] == 0) + int(g[-1] == 0)
    changes = np.nonzero(s[:-1] != s[1:])[0]
    n_int = int(changes.size)
    if refine:
        n_int += 2 * _hidden_zero_pairs(real, g, level)
    return n_int, n_bd


def _hidden_zero_pairs(real, g, level) -> int:
    """Pairs of zeros between two grid points of equal sign, found at the extremum."""
    if (1,) not in real.arrays or real.evaluator is None:
        return 0
    x = real.domain.grid_axes(real.h)[0]
    dg = real[(1,)]
    s = g >= 0
    cand = np.nonzero((s[:-1] == s[1:]) & (np.sign(dg[:-1]) != np.sign(dg[1:])))[0]
    found = 0
    for i in cand:
        def fp(t):
            return float(real.evaluate([[t]], [(1,)])[0, 0])
        try:
            t = brentq(fp, x[i], x[i + 1], xtol=1e-13)
        except ValueError:
            continue
        val = float(real.evaluate([[t]], [(0,)])[0, 0]) - level
        if (val >= 0) != s[i]:
            found += 1
    return found


def count_components(real, domain: BoxDomain | None, level: float, kind: str) -> ComponentCensus:
    if kind == ES:
        return count_excursion_components(real, domain, level, keep_labels=False)
    if kind == LS:
        return count_level_components(real, domain, level)
    raise ValueError(f"unknown component kind {kind!r}")


def count_interior(real, domain, level, kind) -> int:
    return count_components(real, domain, level, kind).count_interior
