"""Independent reference computations used by the tests (no package code)."""
import itertools
from fractions import Fraction
from math import comb, log

import numpy as np


def return_tail_2d(m):
    """Exact ``P(T_0 > m)`` for the planar walk from the first-return renewal equation.

    ``u_{2k} = (C(2k, k) / 4^k)^2`` is the probability of sitting at the
    origin at time 2k; first-return probabilities follow from
    ``u_n = sum_j f_j u_{n-j}``.
    """
    K = m // 2
    u = np.empty(K + 1)
    u[0] = 1.0
    # C(2k,k)/4^k by its ratio recursion keeps everything in floating point
    c = 1.0
    for k in range(1, K + 1):
        c *= (2 * k - 1) / (2 * k)
        u[k] = c * c
    f = np.zeros(K + 1)
    for k in range(1, K + 1):
        f[k] = u[k] - np.dot(f[1:k], u[k - 1:0:-1])
    return 1.0 - f[1:].sum()


def return_tail_2d_exact(m):
    """Same quantity in rational arithmetic (small m)."""
    K = m // 2
    u = [Fraction(comb(2 * k, k) ** 2, 16 ** k) for k in range(K + 1)]
    f = [Fraction(0)] * (K + 1)
    for k in range(1, K + 1):
        f[k] = u[k] - sum(f[j] * u[k - j] for j in range(1, k))
    return 1 - sum(f[1:])


def units(d):
    out = []
    for k in range(2 * d):
        e = [0] * d
        e[k // 2] = 1 if k % 2 == 0 else -1
        out.append(tuple(e))
    return out


def points_of(d, dirs):
    e = units(d)
    x = (0,) * d
    pts = [x]
    for k in dirs:
        x = tuple(a + b for a, b in zip(x, e[k]))
        pts.append(x)
    return pts


def naive_stats(d, pts):
    """M, M0, L, range size and the boundary multiplicities from a list of points."""
    counts = {}
    for p in pts:
        counts[p] = counts.get(p, 0) + 1
    e = units(d)
    bnd = [p for p in counts if any(tuple(a + b for a, b in zip(p, u)) not in counts for u in e)]
    mult = [counts[p] for p in bnd]
    return {"M": max(mult), "M0": max(counts.values()), "L": len(bnd),
            "range_size": len(counts), "mult": mult}


def brute_expectation(d, n, fn):
    """Exact mean of ``fn(points)`` over all ``(2d)^n`` paths via itertools.product."""
    total = Fraction(0)
    for dirs in itertools.product(range(2 * d), repeat=n):
        total += fn(points_of(d, dirs))
    return total / (2 * d) ** n


BETA2 = 1 / log(2)
