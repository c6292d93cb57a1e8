import numpy as np
import pytest
from hypothesis import given, strategies as st

from walklab.lattice import (direction_index, generate_walk, is_adjacent, neighbors,
                             path_from_directions, path_from_points, unit)
from walklab.rng import RngStream


def test_unit_order():
    assert [unit(2, k) for k in range(4)] == [(1, 0), (-1, 0), (0, 1), (0, -1)]


@given(st.integers(2, 5), st.data())
def test_direction_index_inverts_unit(d, data):
    k = data.draw(st.integers(0, 2 * d - 1))
    assert direction_index(unit(d, k)) == k


def test_neighbors():
    nb = neighbors((0, 0, 0))
    assert len(nb) == 6 and len(set(nb)) == 6
    assert all(is_adjacent((0, 0, 0), y) for y in nb)
    assert not is_adjacent((0, 0), (1, 1))


def test_unsupported_dimension():
    with pytest.raises(ValueError):
        generate_walk(6, 3, RngStream(0))
    with pytest.raises(ValueError):
        direction_index((1, 1))


def test_path_validation():
    p = path_from_points([(0, 0), (0, 1), (0, 0)])
    assert p.n == 2 and p[1] == (0, 1)
    with pytest.raises(ValueError):
        path_from_points([(0, 0), (1, 1)])
    with pytest.raises(ValueError):
        path_from_points([(1, 0), (1, 1)])


@given(st.integers(2, 5), st.integers(0, 200), st.integers(0, 2 ** 32))
def test_generated_walks_are_valid(d, n, seed):
    p = generate_walk(d, n, RngStream(seed)).check()
    assert p.points.shape == (n + 1, d)


def test_path_from_directions_matches_steps():
    p = path_from_directions(2, [0, 2, 1, 3])
    assert p.as_tuples() == [(0, 0), (1, 0), (1, 1), (0, 1), (0, 0)]
    assert np.all(p.points[-1] == 0)


def test_horizon_cap():
    with pytest.raises(ValueError):
        generate_walk(2, 10, RngStream(0), horizon_cap=5)
