import numpy as np
import pytest
from scipy.stats import chisquare

from walklab.rng import RngStream, mix64


def test_same_key_same_stream():
    a = RngStream(42, 7)
    b = RngStream(42, 7)
    assert [a.next_uint64() for _ in range(5)] == [b.next_uint64() for _ in range(5)]
    assert np.array_equal(a.directions(3, 100), b.directions(3, 100))


def test_distinct_streams_differ():
    xs = {RngStream(1, s).next_uint64() for s in range(50)}
    assert len(xs) == 50
    assert RngStream(1, 0).next_uint64() != RngStream(2, 0).next_uint64()


def test_spawn_is_pure():
    r = RngStream(9, 3)
    assert r.spawn(4).stream_id == RngStream(9, 3).spawn(4).stream_id
    assert r.spawn(4).stream_id != r.spawn(5).stream_id
    assert mix64(3, 4) == r.spawn(4).stream_id


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_directions_uniform(d):
    dirs = RngStream(11, d).directions(d, 200_000)
    assert dirs.min() >= 0 and dirs.max() < 2 * d
    counts = np.bincount(dirs, minlength=2 * d)
    assert chisquare(counts).pvalue > 1e-4


def test_uniform_range():
    r = RngStream(5)
    u = np.array([r.uniform() for _ in range(2000)])
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.03


def test_rejects_bad_keys():
    with pytest.raises(ValueError):
        RngStream(-1)
    with pytest.raises(ValueError):
        RngStream(0, 2 ** 64)
