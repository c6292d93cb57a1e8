"""Incremental bookkeeping of the walk range, visit counts and inner boundary.

:class:`RangeState` is the reference tracker: a dict from point to
:class:`SiteRecord`, updated one step at a time with O(d) work per step.
:func:`recompute_from_scratch` rebuilds the same state for an index
interval ``[l, n]`` of a materialised path with no incremental logic and
serves as its oracle.  The compiled tracker used for long runs lives in
:mod:`walklab.fastrange`.
"""
from collections import Counter
from dataclasses import dataclass, field

from .lattice import add, check_dimension, is_adjacent, neighbors, origin, unit


@dataclass(slots=True)
class SiteRecord:
    visit_count: int
    neighbors_in_range: int
    first_visit_time: int
    visit_times: list = field(default=None)


class RangeState:
    """Range ``R(n)`` of a walk together with per-site visit and neighbour counts.

    ``keep_visit_times`` retains the step indices of the first
    ``max_visit_times`` visits to every site (all visits when ``None``).
    """

    def __init__(self, d, keep_visit_times=False, max_visit_times=None):
        self.d = check_dimension(d)
        self.keep_visit_times = keep_visit_times
        self.max_visit_times = max_visit_times
        self.sites = {}
        self.current = None
        self.step_index = -1
        self.boundary_count = 0

    @classmethod
    def start(cls, d, **kw):
        state = cls(d, **kw)
        o = origin(d)
        state.sites[o] = SiteRecord(1, 0, 0, [0] if state.keep_visit_times else None)
        state.current = o
        state.step_index = 0
        state.boundary_count = 1
        return state

    @property
    def is_empty(self):
        return not self.sites

    @property
    def range_size(self):
        return len(self.sites)

    def _record_time(self, rec, t):
        if rec.visit_times is not None and (
            self.max_visit_times is None or len(rec.visit_times) < self.max_visit_times
        ):
            rec.visit_times.append(t)

    def advance(self, nxt):
        nxt = tuple(nxt)
        if self.current is None:
            raise ValueError("cannot advance an empty state")
        if not is_adjacent(self.current, nxt):
            raise ValueError(f"{nxt} is not adjacent to the current position {self.current}")
        t = self.step_index + 1
        rec = self.sites.get(nxt)
        if rec is None:
            full = 2 * self.d
            count = 0
            for y in neighbors(nxt):
                other = self.sites.get(y)
                if other is not None:
                    count += 1
                    other.neighbors_in_range += 1
                    if other.neighbors_in_range == full:
                        self.boundary_count -= 1
            rec = SiteRecord(0, count, t, [] if self.keep_visit_times else None)
            self.sites[nxt] = rec
            if count < full:
                self.boundary_count += 1
        rec.visit_count += 1
        self._record_time(rec, t)
        self.current = nxt
        self.step_index = t
        return self

    def advance_direction(self, k):
        return self.advance(add(self.current, unit(self.d, k)))

    def is_inner_boundary(self, x):
        rec = self.sites.get(tuple(x))
        return rec is not None and rec.neighbors_in_range < 2 * self.d

    def is_directional_boundary(self, x, b):
        x = tuple(x)
        return x in self.sites and add(x, b) not in self.sites

    def boundary_sites(self):
        full = 2 * self.d
        return [x for x, r in self.sites.items() if r.neighbors_in_range < full]

    def copy(self):
        new = RangeState(self.d, self.keep_visit_times, self.max_visit_times)
        new.sites = {
            x: SiteRecord(r.visit_count, r.neighbors_in_range, r.first_visit_time,
                          None if r.visit_times is None else list(r.visit_times))
            for x, r in self.sites.items()
        }
        new.current = self.current
        new.step_index = self.step_index
        new.boundary_count = self.boundary_count
        return new

    def audit(self):
        """Slow full recount of every bookkeeping invariant; raises AssertionError on drift."""
        full = 2 * self.d
        total = 0
        boundary = 0
        for x, r in self.sites.items():
            assert r.visit_count >= 1, x
            nb = sum(1 for y in neighbors(x) if y in self.sites)
            assert r.neighbors_in_range == nb, (x, r.neighbors_in_range, nb)
            boundary += nb < full
            total += r.visit_count
            if r.visit_times is not None and self.max_visit_times is None:
                assert len(r.visit_times) == r.visit_count, x
            if r.visit_times:
                assert all(a < b for a, b in zip(r.visit_times, r.visit_times[1:])), x
        assert boundary == self.boundary_count, (boundary, self.boundary_count)
        if self.sites:
            assert 1 <= self.boundary_count <= len(self.sites)
        return True

    def dump(self):
        """Debug dump: ``x1 x2 [x3 ...] visit_count neighbors_in_range is_boundary`` per line."""
        full = 2 * self.d
        lines = []
        for x in sorted(self.sites):
            r = self.sites[x]
            coords = " ".join(str(c) for c in x)
            lines.append(f"{coords} {r.visit_count} {r.neighbors_in_range} "
                         f"{int(r.neighbors_in_range < full)}")
        return "\n".join(lines) + ("\n" if lines else "")

    def signature(self):
        """Comparable summary used by equivalence tests."""
        return (
            self.boundary_count,
            {x: (r.visit_count, r.neighbors_in_range) for x, r in self.sites.items()},
        )


def new_state(d, **kw):
    """State of the range at time 0: ``R(0) = {0}``."""
    return RangeState.start(d, **kw)


def advance(state, nxt):
    return state.advance(nxt)


def track_path(path, keep_visit_times=False, max_visit_times=None):
    """Run the incremental tracker along an entire path."""
    state = RangeState.start(path.d, keep_visit_times=keep_visit_times,
                             max_visit_times=max_visit_times)
    for p in path.points[1:].tolist():
        state.advance(tuple(p))
    return state


def recompute_from_scratch(path, l, n, keep_visit_times=False):
    """State describing ``R[l, n]`` built directly from the points ``S_l..S_n``.

    ``l = n + 1`` yields the empty state (the convention ``R[l, n] = {}``).
    """
    if l < 0 or n < -1 or n > path.n:
        raise ValueError(f"interval [{l}, {n}] outside path of length {path.n}")
    if l > n + 1:
        raise ValueError(f"invalid interval [{l}, {n}]")
    state = RangeState(path.d, keep_visit_times=keep_visit_times)
    if l > n:
        return state
    pts = [tuple(p) for p in path.points[l:n + 1].tolist()]
    counts = Counter(pts)
    first = {}
    times = {}
    for j, p in enumerate(pts, start=l):
        first.setdefault(p, j)
        if keep_visit_times:
            times.setdefault(p, []).append(j)
    full = 2 * path.d
    boundary = 0
    for p, c in counts.items():
        nb = sum(1 for y in neighbors(p) if y in counts)
        boundary += nb < full
        state.sites[p] = SiteRecord(c, nb, first[p], times.get(p))
    state.current = pts[-1]
    state.step_index = n
    state.boundary_count = boundary
    return state
