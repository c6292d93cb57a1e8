import math

import pytest
from hypothesis import given, strategies as st

from oracles import BETA2
from walklab.lattice import generate_walk, path_from_directions, path_from_points
from walklab.rng import RngStream
from walklab.statistics import (BetaConstant, BetaSource, beta_from_p, multiplicity_histogram,
                                snapshot, theta_threshold, theta_tilde, theta_tilde_level,
                                visit_time)
from walklab.tracker import track_path

ZIGZAG = [(0, 0), (0, 1), (0, 0), (0, 1), (0, 0)]


def test_zigzag_snapshot():
    s = track_path(path_from_points(ZIGZAG))
    snap = snapshot(s, BETA2, deltas=(0.5,), ps=(1, 2, 3))
    assert (snap.M, snap.M0, snap.L, snap.range_size) == (3, 3, 2, 2)
    assert snap.J == {1: 0, 2: 1, 3: 1}


@given(st.lists(st.integers(0, 3), min_size=2, max_size=2), st.floats(0.01, 0.99))
def test_theta_equals_L_at_n2(dirs, delta):
    # beta_2 * delta * log 2 = delta < 1, so every boundary site counts
    s = track_path(path_from_directions(2, dirs))
    snap = snapshot(s, BETA2, deltas=(delta,))
    assert snap.Theta[delta] == snap.L


@given(st.lists(st.integers(0, 3), min_size=2, max_size=400))
def test_snapshot_invariants(dirs):
    s = track_path(path_from_directions(2, dirs))
    n = len(dirs)
    deltas = (0.1, 0.25, 0.5, 0.75, 0.9)
    snap = snapshot(s, BETA2, deltas=deltas, ps=range(1, n + 2))
    assert snap.M <= snap.M0 <= n + 1
    assert snap.L <= snap.range_size <= n + 1
    th = [snap.Theta[dl] for dl in deltas]
    assert all(a >= b for a, b in zip(th, th[1:])) and th[0] <= snap.L
    assert sum(snap.J.values()) == snap.L
    assert sum(multiplicity_histogram(s).values()) == snap.L
    assert snapshot(s, BETA2, deltas=deltas) == snapshot(s, BETA2, deltas=deltas)


def test_snapshot_rejections():
    s = track_path(path_from_points([(0, 0), (1, 0)]))
    with pytest.raises(ValueError):
        snapshot(s, 1.0)
    s = track_path(path_from_points(ZIGZAG))
    with pytest.raises(ValueError):
        snapshot(s, 1.0, deltas=(1.0,))
    with pytest.raises(ValueError):
        snapshot(s, 1.0, ps=(0,))


def test_threshold_tie_included():
    # threshold exactly 2 at n = e^2 would need non-integer n; use beta to force it
    n = 4
    beta = 2.0 / (0.5 * math.log(n))
    assert theta_threshold(beta, 0.5, n) == pytest.approx(2.0)
    s = track_path(path_from_points(ZIGZAG))
    assert snapshot(s, beta, deltas=(0.5,)).Theta[0.5] == 2


def test_visit_time_examples():
    s = track_path(path_from_points(ZIGZAG[:3]), keep_visit_times=True)
    assert visit_time(s, (0, 1), 0) == 1
    assert visit_time(s, (0, 0), 0) == 0
    assert visit_time(s, (0, 0), 1) == 2
    assert visit_time(s, (5, 5), 0) is None
    assert visit_time(s, (0, 1), 1) is None
    with pytest.raises(ValueError):
        visit_time(track_path(path_from_points(ZIGZAG[:3])), (0, 0), 0)


def test_visit_time_linear_scan():
    path = generate_walk(2, 1000, RngStream(3))
    s = track_path(path, keep_visit_times=True)
    pts = path.as_tuples()
    for x in list(s.sites)[:200]:
        times = [j for j, p in enumerate(pts) if p == x]
        for p, t in enumerate(times):
            assert visit_time(s, x, p) == t
        assert visit_time(s, x, len(times)) is None


def test_theta_tilde_zigzag():
    path = path_from_points(ZIGZAG)
    s = track_path(path, keep_visit_times=True)
    beta = 2.0
    assert theta_tilde_level(beta, 4) == 2
    assert theta_tilde(path, s, beta) == 2
    assert theta_tilde(path, s, 50.0) == 0


def test_theta_tilde_dominates_final_boundary_count():
    for i in range(100):
        path = generate_walk(2, 1024, RngStream(21, i))
        s = track_path(path, keep_visit_times=True)
        for beta in (0.5, 1.0, BETA2):
            q = theta_tilde_level(beta, 1024)
            final = sum(1 for x in s.boundary_sites() if s.sites[x].visit_count >= q)
            assert theta_tilde(path, s, beta) >= final


def test_beta_from_p():
    assert beta_from_p(math.exp(-1)) == pytest.approx(1.0)
    assert beta_from_p(0.5) == pytest.approx(1.442695, abs=1e-6)
    assert beta_from_p(0.25) == pytest.approx(0.721348, abs=1e-6)
    for bad in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(ValueError):
            beta_from_p(bad)


@given(st.floats(1e-6, 1 - 1e-6), st.floats(1e-6, 1 - 1e-6))
def test_beta_increasing_in_p(p, q):
    if p < q:
        assert beta_from_p(p) < beta_from_p(q)


def test_beta_constant_record():
    bc = BetaConstant.from_probability(0.5, BetaSource.EXACT_BRACKET)
    assert bc.to_dict() == {"value": pytest.approx(BETA2), "source": "exact-bracket",
                            "p_estimate": 0.5}
