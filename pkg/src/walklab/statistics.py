"""Checkpoint statistics of the range: M, M0, L, J(p), Theta(delta), Theta-tilde(beta)."""
import math
from dataclasses import dataclass, field
from enum import Enum

from .tracker import RangeState


class BetaSource(str, Enum):
    EXACT_BRACKET = "exact-bracket"
    MONTE_CARLO = "monte-carlo"
    USER_SUPPLIED = "user-supplied"


def beta_from_p(p):
    """``1 / (-log p)``: the boundary favourite-site constant for return probability ``p``."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p!r}")
    return 1.0 / -math.log(p)


@dataclass(frozen=True)
class BetaConstant:
    value: float
    source: BetaSource
    p_estimate: float

    @classmethod
    def from_probability(cls, p, source=BetaSource.USER_SUPPLIED):
        return cls(beta_from_p(p), BetaSource(source), float(p))

    def to_dict(self):
        return {"value": self.value, "source": self.source.value, "p_estimate": self.p_estimate}


@dataclass
class StatSnapshot:
    n: int
    M: int
    M0: int
    L: int
    range_size: int
    J: dict = field(default_factory=dict)
    Theta: dict = field(default_factory=dict)
    ThetaTilde: dict = None


def theta_threshold(beta, delta, n):
    """Real visit-count threshold ``beta * delta * log n`` (compared with ``>=``)."""
    return _beta_value(beta) * delta * math.log(n)


def theta_tilde_level(beta, n):
    """Visit level ``q = ceil(beta * log(n / 2))``, floored at 1."""
    return max(1, math.ceil(beta * math.log(n / 2)))


def _beta_value(beta):
    return beta.value if isinstance(beta, BetaConstant) else float(beta)


def snapshot(state: RangeState, beta, deltas=(), ps=(), betas_tilde=None, path=None):
    """Evaluate every statistic of ``state`` at its current time ``n``.

    ``betas_tilde`` needs the materialised ``path`` and a state built with
    retained visit times.
    """
    n = state.step_index
    if n < 2:
        raise ValueError("statistics need n >= 2 so that log n > 0")
    for dl in deltas:
        if not 0.0 < dl < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {dl!r}")
    for p in ps:
        if p < 1:
            raise ValueError(f"multiplicity p must be >= 1, got {p!r}")
    b = _beta_value(beta)
    full = 2 * state.d
    M = M0 = L = 0
    boundary_counts = []
    for rec in state.sites.values():
        k = rec.visit_count
        if k > M0:
            M0 = k
        if rec.neighbors_in_range < full:
            L += 1
            boundary_counts.append(k)
            if k > M:
                M = k
    J = {p: sum(1 for k in boundary_counts if k == p) for p in ps}
    Theta = {}
    for dl in deltas:
        thr = theta_threshold(b, dl, n)
        Theta[dl] = sum(1 for k in boundary_counts if k >= thr)
    snap = StatSnapshot(n, M, M0, L, len(state.sites), J, Theta)
    if betas_tilde:
        if path is None:
            raise ValueError("theta-tilde needs the materialised path")
        snap.ThetaTilde = {bt: theta_tilde(path, state, bt, n) for bt in betas_tilde}
    return snap


def multiplicity_histogram(state):
    """``{p: J(p)}`` over every multiplicity present on the boundary (audit mode)."""
    full = 2 * state.d
    hist = {}
    for rec in state.sites.values():
        if rec.neighbors_in_range < full:
            hist[rec.visit_count] = hist.get(rec.visit_count, 0) + 1
    return hist


def visit_time(state, x, p):
    """``T_x^p``: the index of the (p+1)-th visit to ``x``, or ``None`` if it has not happened."""
    rec = state.sites.get(tuple(x))
    if rec is None:
        return None
    if rec.visit_times is None:
        raise ValueError("visit times were not retained for this state")
    if p < len(rec.visit_times):
        return rec.visit_times[p]
    if state.max_visit_times is not None and p < rec.visit_count:
        raise ValueError(f"visit {p} lies beyond the retention cap {state.max_visit_times}")
    return None


def theta_tilde(path, state, beta, n=None):
    """Number of sites visited at least ``q`` times that were still on the inner
    boundary at the moment of their ``q``-th visit, ``q = ceil(beta log(n/2))``.

    Boundary status at the visit time is read off a single replay of the
    path, answering the queries in time order.
    """
    n = state.step_index if n is None else n
    if n != state.step_index or n != path.n:
        raise ValueError("theta-tilde is evaluated at the final time of the path")
    q = theta_tilde_level(beta, n)
    queries = []
    for x, rec in state.sites.items():
        if rec.visit_count >= q:
            t = visit_time(state, x, q - 1)
            queries.append((t, x))
    if not queries:
        return 0
    queries.sort()
    replay = RangeState.start(path.d)
    pts = path.points
    count = 0
    qi = 0
    for t in range(0, queries[-1][0] + 1):
        if t > 0:
            replay.advance(tuple(pts[t].tolist()))
        while qi < len(queries) and queries[qi][0] == t:
            count += replay.is_inner_boundary(queries[qi][1])
            qi += 1
    return count
