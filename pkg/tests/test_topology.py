from collections import deque

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from fieldclt.domain import BoxDomain
from fieldclt.errors import DomainNotCovered
from fieldclt.sampler import bump_function, constant_function, injected_field, sample_field
from fieldclt.topology import (ES, LS, count_components, count_excursion_components,
                               count_excursion_values, count_interior, count_level_components)


def checkerboard(points, alpha):
    """cos(pi x) cos(pi y) and its derivatives."""
    x, y = points[:, 0], points[:, 1]
    out = np.ones(len(points))
    for coord, k in ((x, alpha[0]), (y, alpha[1])):
        out = out * np.pi**k * np.cos(np.pi * coord + k * np.pi / 2)
    return out


def bfs_census(values, level):
    """Reference labelling: 4-neighbours, plus cell diagonals when the cell mean is in the set."""
    n0, n1 = values.shape
    inside = values >= level
    seen = np.zeros_like(inside)
    interior = boundary = 0
    for start in zip(*np.nonzero(inside)):
        if seen[start]:
            continue
        seen[start] = True
        q = deque([start])
        touches = False
        while q:
            i, j = q.popleft()
            touches |= i in (0, n0 - 1) or j in (0, n1 - 1)
            nbrs = [(i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)]
            for di in (-1, 1):
                for dj in (-1, 1):
                    a, b = min(i, i + di), min(j, j + dj)
                    if 0 <= a < n0 - 1 and 0 <= b < n1 - 1:
                        if values[a:a + 2, b:b + 2].mean() >= level:
                            nbrs.append((i + di, j + dj))
            for u in nbrs:
                if 0 <= u[0] < n0 and 0 <= u[1] < n1 and inside[u] and not seen[u]:
                    seen[u] = True
                    q.append(u)
        interior += not touches
        boundary += touches
    return interior, boundary


@given(arrays(np.float64, st.tuples(st.integers(2, 9), st.integers(2, 9)),
              elements=st.integers(-3, 3).map(float)), st.sampled_from([-0.5, 0.0, 0.5, 1.0]))
def test_labelling_matches_reference(values, level):
    assert count_excursion_values(values, level) == bfs_census(values, level)


@given(st.integers(0, 10_000), st.floats(-2, 2), st.floats(-3, 3))
def test_shifting_field_and_level_together(seed, level, c):
    values = np.random.default_rng(seed).standard_normal((12, 12))
    c = round(c, 3)
    assert count_excursion_values(values + c, level + c) == count_excursion_values(values, level)


@pytest.fixture(scope="module")
def board():
    return injected_field(BoxDomain.cube(2, 2), 1 / 16, checkerboard)


def test_checkerboard_excursion_blobs(board):
    # peaks at integer points with i + j even; five avoid the boundary of [-2, 2]^2
    c = count_components(board, None, 0.5, ES)
    assert c.count_interior == 5
    assert c.count_boundary_touching == 8
    assert c.total == 13


def test_checkerboard_level_contours(board):
    c = count_components(board, None, 0.5, LS)
    assert c.count_interior == 5


def test_constant_field_below_level_is_one_boundary_component():
    real = injected_field(BoxDomain.cube(2, 2), 0.25, constant_function(3.0))
    c = count_excursion_components(real, None, 2.0)
    assert (c.count_interior, c.count_boundary_touching) == (0, 1)


def test_constant_field_above_level_is_empty():
    real = injected_field(BoxDomain.cube(2, 2), 0.25, constant_function(3.0))
    assert count_excursion_components(real, None, 4.0).total == 0
    assert count_level_components(real, None, 4.0).total == 0
    assert count_level_components(real, None, 2.0).total == 0


def test_single_bump_has_one_closed_contour():
    real = injected_field(BoxDomain.cube(3, 2), 0.125, bump_function((0.2, -0.1), 2.0, 1.0))
    c = count_level_components(real, None, 1.0)
    assert (c.count_interior, c.count_boundary_touching) == (1, 0)


def test_one_dimensional_zeros():
    f = lambda x, a: np.sin(np.pi * x[:, 0] + a[0] * np.pi / 2) * np.pi ** a[0]
    real = injected_field(BoxDomain((0,), (4,)), 1 / 8, f)
    # zeros at 1, 2, 3 inside (0, 4); the endpoints are zeros on the boundary
    assert count_level_components(real, None, 0.25).count_interior == 4


def test_census_parts_add_up(bf2):
    real = sample_field(bf2, BoxDomain.cube(6, 2), 0.25, seed=3, max_order=0)
    c = count_excursion_components(real, None, 0.0)
    assert c.count_interior + c.count_boundary_touching == c.total
    assert np.unique(c.labels[c.labels > 0]).size == c.total
    # interior components stay off the boundary layer
    edge = np.concatenate([c.labels[0], c.labels[-1], c.labels[:, 0], c.labels[:, -1]])
    assert not np.isin(c.interior_ids, edge).any()


def test_sub_domain_counts(bf2):
    real = sample_field(bf2, BoxDomain.cube(6, 2), 0.25, seed=3, max_order=0)
    sub = BoxDomain.cube(3, 2)
    assert count_interior(real, sub, 0.0, ES) == count_interior(real.restricted(sub), None, 0.0, ES)
    with pytest.raises(DomainNotCovered):
        count_interior(real, BoxDomain.cube(7, 2), 0.0, ES)
