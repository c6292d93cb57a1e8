"""Compiled Monte Carlo kernels for hitting events of a walk started at the origin.

All kernels run a block of independent trials off one random stream and
return integer counts, so blocks merge by addition.  ``bk`` is the
direction index of the neighbour ``b``.
"""
import numba as nb
import numpy as np

from ..rng import draw_direction, next_uniform

CAP_NONE = 0
CAP_STEPS = 1
CAP_RADIUS = 2


@nb.njit(nogil=True, cache=True, inline="always")
def _at(x, ax, sg):
    """True when ``x`` equals ``sg * e_ax`` (the origin when ``sg == 0``)."""
    for i in range(x.shape[0]):
        want = sg if i == ax else 0
        if x[i] != want:
            return False
    return True


@nb.njit(nogil=True)
def _jump(addr, pool, x, level, offsets, thresh, alias):
    d = x.shape[0]
    m = 1 << level
    face = draw_direction(addr, pool, 2 * d)
    ax = face >> 1
    off = offsets[level]
    size = offsets[level + 1] - off
    u = next_uniform(addr) * size
    idx = np.int64(u)
    if idx >= size:
        idx = size - 1
    if u - idx >= thresh[off + idx]:
        idx = alias[off + idx]
    width = 2 * m - 1
    for i in range(d):
        if i == ax:
            continue
        x[i] += idx % width - (m - 1)
        idx //= width
    if face & 1:
        x[ax] -= m
    else:
        x[ax] += m


@nb.njit(nogil=True)
def return_before_neighbor_block(addr, pool, d, bk, cap_kind, cap, trials,
                                 offsets, thresh, alias, max_level):
    """Counts ``(returned, hit_b, cut_off)`` for the race between T_0 and T_b.

    Under a radius cap (sup norm) and with no cap, excursions far from both
    targets are replaced by exact box-exit jumps; a step cap forces plain
    stepping since elapsed time matters.
    """
    bax = bk >> 1
    bsg = 1 if bk % 2 == 0 else -1
    x = np.zeros(d, dtype=np.int64)
    ret = 0
    hitb = 0
    cut = 0
    for _ in range(trials):
        for i in range(d):
            x[i] = 0
        t = 0
        while True:
            if t > 0:
                if _at(x, 0, 0):
                    ret += 1
                    break
                if _at(x, bax, bsg):
                    hitb += 1
                    break
            r = 0
            rb = 0
            for i in range(d):
                a = abs(x[i])
                if a > r:
                    r = a
                ab = abs(x[i] - (bsg if i == bax else 0))
                if ab > rb:
                    rb = ab
            if cap_kind == CAP_STEPS:
                if t >= cap:
                    cut += 1
                    break
                room = 1
            elif cap_kind == CAP_RADIUS:
                if r > cap:
                    cut += 1
                    break
                room = cap + 1 - r
            else:
                room = 1 << 62
            reach = min(r, rb, room)
            if reach >= 2 and max_level >= 1:
                level = 1
                while level < max_level and (2 << level) <= reach:
                    level += 1
                _jump(addr, pool, x, level, offsets, thresh, alias)
            else:
                k = draw_direction(addr, pool, 2 * d)
                if k & 1:
                    x[k >> 1] -= 1
                else:
                    x[k >> 1] += 1
            t += 1
    return ret, hitb, cut


@nb.njit(nogil=True, inline="always")
def _move(x, k):
    """Apply direction ``k`` to ``x``; returns the change in the L1 norm."""
    a = k >> 1
    if k & 1:
        x[a] -= 1
        return -1 if x[a] >= 0 else 1
    x[a] += 1
    return -1 if x[a] <= 0 else 1


@nb.njit(nogil=True)
def truncated_block(addr, pool, d, bk, k, trials):
    """Number of trials with ``T_0 < min(T_b, k)``."""
    bax = bk >> 1
    bsg = 1 if bk % 2 == 0 else -1
    x = np.zeros(d, dtype=np.int64)
    hits = 0
    for _ in range(trials):
        for i in range(d):
            x[i] = 0
        l1 = 0
        for t in range(1, k):
            l1 += _move(x, draw_direction(addr, pool, 2 * d))
            if l1 == 0:
                hits += 1
                break
            if l1 == 1 and x[bax] == bsg:
                break
    return hits


@nb.njit(nogil=True)
def first_times_block(addr, pool, d, bk, horizon, trials, need0, needb, stop_on_first):
    """Histograms of ``min(T, horizon + 1)`` for ``T_0``, ``T_b`` and ``T_0 ^ T_b``.

    A trial stops once every requested time is known (or the first of the
    two when ``stop_on_first``) or at ``horizon`` steps.
    """
    bax = bk >> 1
    bsg = 1 if bk % 2 == 0 else -1
    h0 = np.zeros(horizon + 2, dtype=np.int64)
    hb = np.zeros(horizon + 2, dtype=np.int64)
    hj = np.zeros(horizon + 2, dtype=np.int64)
    x = np.zeros(d, dtype=np.int64)
    for _ in range(trials):
        for i in range(d):
            x[i] = 0
        l1 = 0
        t0 = horizon + 1
        tb = horizon + 1
        for t in range(1, horizon + 1):
            l1 += _move(x, draw_direction(addr, pool, 2 * d))
            if l1 > 1:
                continue
            if l1 == 0:
                if t0 > horizon:
                    t0 = t
            elif x[bax] == bsg and tb > horizon:
                tb = t
            else:
                continue
            if (t0 <= horizon or not need0) and (tb <= horizon or not needb):
                break
            if stop_on_first:
                break
        h0[t0] += 1
        hb[tb] += 1
        hj[min(t0, tb)] += 1
    return h0, hb, hj
