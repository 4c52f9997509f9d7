import numpy as np
import pytest
from hypothesis import given, strategies as st

from fieldclt.domain import BoxDomain, grid_count


def which_strata(box, x):
    return [s for s in box.strata() if s.contains(x) and all(
        box_lo < xi < box_lo + 1 if i in s.free_axes else True
        for i, (xi, box_lo) in enumerate(zip(x, s.anchor)))]


@given(st.integers(1, 3), st.integers(1, 3), st.data())
def test_strata_partition_the_box(w, hgt, data):
    box = BoxDomain((0, -1), (w, hgt - 1))
    # points on a quarter-lattice hit every face type
    x = np.array([data.draw(st.integers(0, 4 * w)) / 4, data.draw(st.integers(-4, 4 * hgt - 4)) / 4])
    assert len(which_strata(box, x)) == 1


def test_stratum_counts_of_a_square():
    box = BoxDomain.cube(2, 2)
    assert len(box.strata(0)) == 25
    assert len(box.strata(1)) == 2 * 4 * 5
    assert len(box.strata(2)) == 16
    assert len(box.cubes()) == 16


def test_faces_of_a_cube():
    box = BoxDomain.cube(1, 2)
    faces = box.strata_of_cube((0, 0))
    assert len(faces) == 9
    assert all(f.in_closure_of_cube((0, 0)) for f in faces)


def test_box_validation():
    with pytest.raises(ValueError):
        BoxDomain((0.5,), (2,))
    with pytest.raises(ValueError):
        BoxDomain((2,), (1,))


def test_grid_and_volume():
    box = BoxDomain((0, 0), (2, 3))
    assert box.volume == 6
    assert box.grid_shape(0.25) == (9, 13)
    with pytest.raises(ValueError):
        grid_count(1, 0.3)


def test_split_shares_interface():
    a, b = BoxDomain.cube(2, 2).split(0)
    assert a.upper[0] == b.lower[0] == 0
