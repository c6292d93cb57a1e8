"""Compiled range tracker for long walks.

Sites live in an open-addressing hash table (linear probing, power-of-two
capacity, rehash at half load) holding full coordinates, so no coordinate
packing limits apply in any dimension.  Per site the table keeps the visit
count, the number of neighbours in the range and the number of visits made
while the site was on the inner boundary; the last one answers
theta-tilde queries without retaining visit times.
"""
import math

import numba as nb
import numpy as np

from .rng import draw_direction

_H1 = np.uint64(0x9E3779B97F4A7C15)
_H2 = np.uint64(0xBF58476D1CE4E5B9)
_S31 = np.uint64(31)


@nb.njit(nogil=True, cache=True, inline="always")
def _hash(x, d):
    h = np.uint64(0)
    for i in range(d):
        h = (h ^ np.uint64(x[i] & 0xFFFFFFFFFFFF)) * _H1
        h = h ^ (h >> _S31)
    h = h * _H2
    return h ^ (h >> _S31)


@nb.njit(nogil=True, cache=True)
def _find(keys, vc, x, d):
    mask = np.uint64(keys.shape[0] - 1)
    i = np.int64(_hash(x, d) & mask)
    while True:
        if vc[i] == 0:
            return i
        same = True
        for j in range(d):
            if keys[i, j] != x[j]:
                same = False
                break
        if same:
            return i
        i = np.int64((np.uint64(i) + np.uint64(1)) & mask)


@nb.njit(nogil=True, cache=True)
def _grow(keys, vc, nbr, bv):
    cap = keys.shape[0] * 2
    d = keys.shape[1]
    k2 = np.zeros((cap, d), dtype=np.int64)
    v2 = np.zeros(cap, dtype=np.int64)
    n2 = np.zeros(cap, dtype=np.int8)
    b2 = np.zeros(cap, dtype=np.int64)
    for i in range(keys.shape[0]):
        if vc[i] > 0:
            s = _find(k2, v2, keys[i], d)
            k2[s] = keys[i]
            v2[s] = vc[i]
            n2[s] = nbr[i]
            b2[s] = bv[i]
    return k2, v2, n2, b2


@nb.njit(nogil=True, cache=True)
def _scan(keys, vc, nbr, bv, full, thr, ps, qs, row):
    """Fill ``row`` = [M, M0, L, size, J(ps)..., Theta(thr)..., ThetaTilde(qs)...]."""
    M = 0
    M0 = 0
    L = 0
    size = 0
    npj = ps.shape[0]
    nth = thr.shape[0]
    nq = qs.shape[0]
    for c in range(3 + npj + nth + nq + 1):
        row[c] = 0
    for i in range(keys.shape[0]):
        k = vc[i]
        if k == 0:
            continue
        size += 1
        if k > M0:
            M0 = k
        for j in range(nq):
            if bv[i] >= qs[j]:
                row[4 + npj + nth + j] += 1
        if nbr[i] < full:
            L += 1
            if k > M:
                M = k
            for j in range(npj):
                if k == ps[j]:
                    row[4 + j] += 1
            for j in range(nth):
                if k >= thr[j]:
                    row[4 + npj + j] += 1
    row[0] = M
    row[1] = M0
    row[2] = L
    row[3] = size


@nb.njit(nogil=True)
def run_walk(addr, pool, d, horizon, checkpoints, thresholds, ps, levels, init_cap):
    """Walk ``horizon`` steps from the origin and record statistics at each checkpoint.

    ``thresholds[c, j]`` is the Theta threshold for delta j at checkpoint c and
    ``levels[c, j]`` the theta-tilde level q for beta j.  Returns the stats
    array (one row per checkpoint) and the incrementally maintained boundary
    count at every checkpoint for auditing.
    """
    full = 2 * d
    m = 2 * d
    cap = init_cap
    keys = np.zeros((cap, d), dtype=np.int64)
    vc = np.zeros(cap, dtype=np.int64)
    nbr = np.zeros(cap, dtype=np.int8)
    bv = np.zeros(cap, dtype=np.int64)
    ncol = 4 + ps.shape[0] + thresholds.shape[1] + levels.shape[1]
    out = np.zeros((checkpoints.shape[0], ncol), dtype=np.int64)
    tracked_L = np.zeros(checkpoints.shape[0], dtype=np.int64)
    x = np.zeros(d, dtype=np.int64)
    y = np.zeros(d, dtype=np.int64)
    s = _find(keys, vc, x, d)
    vc[s] = 1
    bv[s] = 1
    size = 1
    L = 1
    ci = 0
    while ci < checkpoints.shape[0] and checkpoints[ci] == 0:
        _scan(keys, vc, nbr, bv, full, thresholds[ci], ps, levels[ci], out[ci])
        tracked_L[ci] = L
        ci += 1
    for t in range(1, horizon + 1):
        k = draw_direction(addr, pool, m)
        ax = k >> 1
        if k & 1:
            x[ax] -= 1
        else:
            x[ax] += 1
        s = _find(keys, vc, x, d)
        if vc[s] == 0:
            if 2 * (size + 1) > cap:
                keys, vc, nbr, bv = _grow(keys, vc, nbr, bv)
                cap = keys.shape[0]
                s = _find(keys, vc, x, d)
            cnt = 0
            for j in range(d):
                y[j] = x[j]
            for a in range(d):
                for sg in (1, -1):
                    y[a] = x[a] + sg
                    s2 = _find(keys, vc, y, d)
                    if vc[s2] > 0:
                        cnt += 1
                        nbr[s2] += 1
                        if nbr[s2] == full:
                            L -= 1
                y[a] = x[a]
            keys[s] = x
            nbr[s] = cnt
            size += 1
            if cnt < full:
                L += 1
        vc[s] += 1
        if nbr[s] < full:
            bv[s] += 1
        while ci < checkpoints.shape[0] and checkpoints[ci] == t:
            _scan(keys, vc, nbr, bv, full, thresholds[ci], ps, levels[ci], out[ci])
            tracked_L[ci] = L
            ci += 1
    return out, tracked_L


def initial_capacity(d, horizon):
    """Starting table size: roughly the expected range, so growth is rare."""
    expect = horizon + 1 if d >= 3 else 3.2 * (horizon + 1) / max(1.0, math.log(horizon + 2))
    return max(64, 1 << int(math.ceil(math.log2(2 * expect + 1))))


def column_names(ps, deltas, betas_tilde):
    return (["M", "M0", "L", "range_size"]
            + [f"J_{p}" for p in ps]
            + [f"theta_{dl!r}" for dl in deltas]
            + [f"thetatilde_{bt!r}" for bt in betas_tilde])


def walk_statistics(rng, d, checkpoints, beta, deltas=(), ps=(), betas_tilde=()):
    """Statistics of one walk driven by ``rng`` at every checkpoint.

    Returns ``(stats, tracked_L)``: ``stats`` has one row per checkpoint with
    columns given by :func:`column_names`.
    """
    from .statistics import theta_tilde_level, theta_threshold

    cps = np.asarray(checkpoints, dtype=np.int64)
    if cps.size == 0 or np.any(np.diff(cps) <= 0) or cps[0] < 0:
        raise ValueError("checkpoints must be non-empty, non-negative and strictly increasing")
    horizon = int(cps[-1])
    thr = np.zeros((cps.size, len(deltas)))
    lev = np.zeros((cps.size, len(betas_tilde)), dtype=np.int64)
    for c, n in enumerate(cps.tolist()):
        for j, dl in enumerate(deltas):
            thr[c, j] = theta_threshold(beta, dl, n) if n >= 2 else np.inf
        for j, bt in enumerate(betas_tilde):
            lev[c, j] = theta_tilde_level(bt, n) if n >= 3 else 1
    return run_walk(rng.addr, rng.pool, d, horizon, cps, thr,
                    np.asarray(ps, dtype=np.int64), lev, initial_capacity(d, horizon))


@nb.njit(nogil=True)
def _batch(addr, pool, d, trials, checkpoints, thresholds, ps, levels):
    ncol = 4 + ps.shape[0] + thresholds.shape[1] + levels.shape[1]
    out = np.zeros((trials, checkpoints.shape[0], ncol), dtype=np.int64)
    horizon = checkpoints[checkpoints.shape[0] - 1]
    for i in range(trials):
        stats, _ = run_walk(addr, pool, d, horizon, checkpoints, thresholds, ps, levels, 64)
        out[i] = stats
    return out


def batch_statistics(rng, d, checkpoints, beta, trials, deltas=(), ps=()):
    """Statistics of ``trials`` short walks drawn back to back from one stream.

    Returns an array ``(trials, len(checkpoints), columns)``; meant for
    Monte Carlo checks against exact enumeration at small n.
    """
    from .statistics import theta_threshold

    cps = np.asarray(checkpoints, dtype=np.int64)
    thr = np.array([[theta_threshold(beta, dl, n) if n >= 2 else np.inf for dl in deltas]
                    for n in cps.tolist()]).reshape(cps.size, len(deltas))
    lev = np.ones((cps.size, 0), dtype=np.int64)
    return _batch(rng.addr, rng.pool, d, int(trials), cps, thr,
                  np.asarray(ps, dtype=np.int64), lev)
