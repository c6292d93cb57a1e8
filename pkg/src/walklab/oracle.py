"""Exact expectations and distributions by enumerating every walk path.

All ``(2d)^n`` paths of length ``n`` are visited depth first and every
statistic is tallied into integer histograms in one pass, so each result
is an exact rational with denominator ``(2d)^n``.

Two engines produce identical histograms:

* ``"tracker"`` drives the production :class:`~walklab.tracker.RangeState`
  (copied at each branch, since the tracker has no undo) and reads the
  statistics through :mod:`walklab.statistics`;
* ``"grid"`` is a compiled depth-first search over a dense occupancy grid
  with in-place undo, used for the larger budgets.

``audit=True`` runs the tracker engine and additionally checks every leaf
against a from-scratch recomputation.
"""
import builtins
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numba as nb
import numpy as np

from .lattice import check_dimension, path_from_directions
from .statistics import multiplicity_histogram, theta_threshold
from .tracker import RangeState, recompute_from_scratch

PATH_BUDGET = 10 ** 8
TRACKER_LIMIT = 1 << 16

STATISTICS = ("M", "M0", "L", "range_size", "J", "Theta")
EVENTS = ("T0<Tb^k", "T0>m", "Tb>m", "T0^Tb>m")
_EVENT_CODE = {e: i for i, e in builtins.enumerate(EVENTS)}


class BudgetError(ValueError):
    pass


@dataclass
class ExactResult:
    d: int
    n: int
    statistic: str
    distribution: dict
    params: dict = field(default_factory=dict)

    @property
    def total(self):
        return sum(self.distribution.values())

    @property
    def expectation(self):
        return Fraction(sum(v * c for v, c in self.distribution.items()), self.total)

    @property
    def expectation_num(self):
        return self.expectation.numerator

    @property
    def expectation_den(self):
        return self.expectation.denominator

    def check(self):
        assert self.total == (2 * self.d) ** self.n, (self.total, self.d, self.n)
        return True

    def to_dict(self):
        out = {"d": self.d, "n": self.n, "statistic": self.statistic,
               "expectation_num": self.expectation_num,
               "expectation_den": self.expectation_den,
               "distribution": {str(k): v for k, v in sorted(self.distribution.items())}}
        if self.params:
            out["params"] = self.params
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _check_budget(d, n):
    check_dimension(d)
    if n < 0:
        raise ValueError("n must be >= 0")
    if (2 * d) ** n > PATH_BUDGET:
        raise BudgetError(f"(2d)^n = {(2 * d) ** n} paths exceeds the budget {PATH_BUDGET}")


# histogram rows: M, M0, L, range_size, J_1..J_{n+1}, Theta_1..Theta_{n+1}
def _rows(n):
    return 4 + 2 * (n + 1)


@nb.njit(nogil=True, cache=True)
def _grid_kernel(d, n, prefix):
    side = 2 * n + 3
    strides = np.empty(d, dtype=np.int64)
    s = 1
    for i in range(d - 1, -1, -1):
        strides[i] = s
        s *= side
    moves = np.empty(2 * d, dtype=np.int64)
    for k in range(2 * d):
        moves[k] = strides[k >> 1] if k % 2 == 0 else -strides[k >> 1]
    grid = np.zeros(s, dtype=np.int64)
    centre = 0
    for i in range(d):
        centre += (n + 1) * strides[i]
    nrow = 4 + 2 * (n + 1)
    hist = np.zeros((nrow, n + 2), dtype=np.int64)
    pos = np.empty(n + 1, dtype=np.int64)
    sites = np.empty(n + 1, dtype=np.int64)
    ch = np.full(n + 1, -1, dtype=np.int64)
    mult = np.zeros(n + 2, dtype=np.int64)
    pos[0] = centre
    grid[centre] = 1
    sites[0] = centre
    nsites = 1
    root = prefix.shape[0]
    for j in range(root):
        p = pos[j] + moves[prefix[j]]
        pos[j + 1] = p
        grid[p] += 1
        if grid[p] == 1:
            sites[nsites] = p
            nsites += 1
    level = root + 1
    leaf = root == n
    while True:
        if not leaf:
            if level <= root:
                break
            if ch[level] >= 0:
                p = pos[level]
                grid[p] -= 1
                if grid[p] == 0:
                    nsites -= 1
            ch[level] += 1
            if ch[level] >= 2 * d:
                ch[level] = -1
                level -= 1
                continue
            p = pos[level - 1] + moves[ch[level]]
            pos[level] = p
            grid[p] += 1
            if grid[p] == 1:
                sites[nsites] = p
                nsites += 1
            if level < n:
                level += 1
                continue
        # evaluate the leaf
        M = 0
        M0 = 0
        L = 0
        for v in range(n + 2):
            mult[v] = 0
        for i in range(nsites):
            x = sites[i]
            k = grid[x]
            if k > M0:
                M0 = k
            full = True
            for m in range(2 * d):
                if grid[x + moves[m]] == 0:
                    full = False
                    break
            if not full:
                L += 1
                mult[k] += 1
                if k > M:
                    M = k
        hist[0, M] += 1
        hist[1, M0] += 1
        hist[2, L] += 1
        hist[3, nsites] += 1
        above = 0
        for p in range(n + 1, 0, -1):
            above += mult[p]
            hist[3 + p, mult[p]] += 1
            hist[4 + n + p, above] += 1
        if leaf:
            break
    return hist


def _tracker_hist(d, n, prefix, audit=False):
    hist = np.zeros((_rows(n), n + 2), dtype=np.int64)
    state = RangeState.start(d)
    dirs = list(prefix)
    for k in prefix:
        state.advance_direction(k)

    def leaf(st):
        mult = multiplicity_histogram(st)
        hist[0, max(mult)] += 1
        hist[1, max(r.visit_count for r in st.sites.values())] += 1
        hist[2, sum(mult.values())] += 1
        hist[3, st.range_size] += 1
        above = 0
        for p in range(n + 1, 0, -1):
            c = mult.get(p, 0)
            above += c
            hist[3 + p, c] += 1
            hist[4 + n + p, above] += 1
        if audit:
            st.audit()
            ref = recompute_from_scratch(path_from_directions(d, dirs), 0, n)
            if ref.signature() != st.signature():
                raise AssertionError(f"tracker disagrees with recomputation on {dirs}")

    def walk(st, depth):
        if depth == n:
            leaf(st)
            return
        for k in range(2 * d):
            nxt = st.copy() if k < 2 * d - 1 else st
            nxt.advance_direction(k)
            dirs.append(k)
            walk(nxt, depth + 1)
            dirs.pop()

    walk(state, len(prefix))
    return hist


def _prefixes(d, n):
    return [np.array([k], dtype=np.int64) for k in range(2 * d)] if n >= 1 else \
        [np.zeros(0, dtype=np.int64)]


def histograms(d, n, engine="auto", threads=1, audit=False):
    """Summed histogram table over all paths; rows as in :func:`_rows`."""
    _check_budget(d, n)
    if engine == "auto":
        engine = "tracker" if audit or (2 * d) ** n <= TRACKER_LIMIT else "grid"
    if audit and engine != "tracker":
        raise ValueError("audit mode runs on the tracker engine")
    if engine == "grid":
        fn = lambda pre: _grid_kernel(d, n, pre)  # noqa: E731
    elif engine == "tracker":
        fn = lambda pre: _tracker_hist(d, n, pre.tolist(), audit)  # noqa: E731
    else:
        raise ValueError(f"unknown engine {engine!r}")
    prefixes = _prefixes(d, n)
    if threads > 1 and engine == "grid":
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(fn, prefixes))
    else:
        parts = [fn(p) for p in prefixes]
    return np.sum(parts, axis=0)


def _row_for(n, statistic, params):
    if statistic in ("M", "M0", "L", "range_size"):
        return ("M", "M0", "L", "range_size").index(statistic)
    if statistic == "J":
        p = int(params["p"])
        if p < 1:
            raise ValueError("multiplicity p must be >= 1")
        return 3 + p if p <= n + 1 else None
    if statistic == "Theta":
        t = theta_level(n, params)
        return 4 + n + t if t <= n + 1 else None
    raise ValueError(f"unknown statistic {statistic!r}")


def theta_level(n, params):
    """Integer visit level equivalent to the Theta threshold in ``params``.

    Either ``threshold`` (a real, compared with ``>=``) or ``beta`` and
    ``delta`` giving ``beta * delta * log n``.
    """
    if "threshold" in params:
        thr = float(params["threshold"])
    else:
        if n < 2:
            raise ValueError("beta * delta * log n needs n >= 2")
        thr = theta_threshold(float(params["beta"]), float(params["delta"]), n)
    return max(1, math.ceil(thr))


def _result(d, n, statistic, params, hist):
    row = _row_for(n, statistic, params)
    if row is None:
        dist = {0: (2 * d) ** n}
    else:
        dist = {int(v): int(c) for v, c in builtins.enumerate(hist[row]) if c}
    return ExactResult(d, n, statistic, dist, dict(params))


def enumerate(d, n, statistic, params=None, engine="auto", threads=1, audit=False):
    """Exact distribution of one statistic at time ``n`` over all paths.

    Hitting events (``T0<Tb^k``, ``T0>m``, ``Tb>m``, ``T0^Tb>m``) are
    forwarded to :func:`enumerate_hitting` with horizon ``n``.
    """
    params = dict(params or {})
    if statistic in EVENTS:
        return enumerate_hitting(d, statistic, n, params, threads=threads)
    hist = histograms(d, n, engine, threads, audit)
    return _result(d, n, statistic, params, hist)


def enumerate_all(d, n, ps=None, thetas=(), engine="auto", threads=1, audit=False):
    """Every range statistic from a single enumeration pass.

    ``thetas`` is a sequence of Theta parameter dicts.
    """
    hist = histograms(d, n, engine, threads, audit)
    out = {s: _result(d, n, s, {}, hist) for s in ("M", "M0", "L", "range_size")}
    for p in (range(1, n + 2) if ps is None else ps):
        out[f"J_{p}"] = _result(d, n, "J", {"p": p}, hist)
    for th in thetas:
        key = "Theta_" + "_".join(f"{k}={v}" for k, v in sorted(th.items()))
        out[key] = _result(d, n, "Theta", th, hist)
    return out


@nb.njit(nogil=True, cache=True)
def _hitting_kernel(d, horizon, bk, code, param, prefix):
    """Paths (out of the subtree) on which the event holds; decided subtrees are
    counted by weight without being expanded."""
    bax = bk >> 1
    bsg = 1 if bk % 2 == 0 else -1
    x = np.zeros(d, dtype=np.int64)
    xs = np.zeros((horizon + 1, d), dtype=np.int64)
    ch = np.full(horizon + 1, -1, dtype=np.int64)
    weight = np.ones(horizon + 2, dtype=np.int64)
    for j in range(horizon - 1, -1, -1):
        weight[j] = weight[j + 1] * 2 * d
    hits = 0
    root = prefix.shape[0]
    # replay the prefix; the event may already be decided
    for j in range(root):
        k = prefix[j]
        xs[j + 1] = xs[j]
        xs[j + 1, k >> 1] += 1 if k % 2 == 0 else -1
    for t in range(1, root + 1):
        verdict = _decide(xs[t], t, bax, bsg, code, param)
        if verdict >= 0:
            return verdict * weight[root]
    if root == horizon:
        raise ValueError("undecided leaf at the horizon")
    level = root + 1
    while level > root:
        ch[level] += 1
        if ch[level] >= 2 * d:
            ch[level] = -1
            level -= 1
            continue
        k = ch[level]
        for i in range(d):
            x[i] = xs[level - 1, i]
        x[k >> 1] += 1 if k % 2 == 0 else -1
        xs[level] = x
        verdict = _decide(x, level, bax, bsg, code, param)
        if verdict >= 0:
            hits += verdict * weight[level]
        elif level == horizon:
            raise ValueError("undecided leaf at the horizon")
        else:
            level += 1
    return hits


@nb.njit(nogil=True, cache=True, inline="always")
def _decide(x, t, bax, bsg, code, param):
    """1 or 0 once the event is settled at time ``t``, else -1."""
    at0 = True
    atb = True
    for i in range(x.shape[0]):
        if x[i] != 0:
            at0 = False
        if x[i] != (bsg if i == bax else 0):
            atb = False
    if code == 0:
        if at0 and t < param:
            return 1
        if atb or t >= param - 1:
            return 0
        return -1
    if code == 1:
        if at0:
            return 0
    elif code == 2:
        if atb:
            return 0
    else:
        if at0 or atb:
            return 0
    if t >= param:
        return 1
    return -1


def enumerate_hitting(d, event, horizon, params=None, threads=1):
    """Exact probability of a hitting event from the first ``horizon`` steps.

    ``params``: ``k`` for ``T0<Tb^k``; ``m`` for the tails; optional ``b``
    (direction index, default ``+e_1``).
    """
    params = dict(params or {})
    if event not in _EVENT_CODE:
        raise ValueError(f"unknown event {event!r}; choose from {EVENTS}")
    _check_budget(d, horizon)
    code = _EVENT_CODE[event]
    if code == 0:
        param = int(params["k"])
        if param < 1:
            raise ValueError("k must be >= 1")
        need = max(param - 1, 0)
    else:
        param = int(params["m"])
        if param < 0:
            raise ValueError("m must be >= 0")
        need = param
    if horizon < need:
        raise ValueError(f"event {event} is not determined within horizon {horizon} "
                         f"(needs {need} steps)")
    bk = int(params.get("b", 0))
    if not 0 <= bk < 2 * d:
        raise ValueError("b must be a direction index in [0, 2d)")
    total = (2 * d) ** horizon
    if code == 0 and param <= 1:
        hits = 0
    elif code != 0 and param == 0:
        hits = total
    else:
        prefixes = _prefixes(d, horizon)
        fn = lambda pre: int(_hitting_kernel(d, horizon, bk, code, param, pre))  # noqa: E731
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                hits = sum(pool.map(fn, prefixes))
        else:
            hits = sum(fn(p) for p in prefixes)
    dist = {v: c for v, c in ((0, total - hits), (1, hits)) if c}
    return ExactResult(d, horizon, event, dist, params)
