"""Two-sided finite-box bounds for ``P(T_0 < T_b)``.

``u(x) = P^x(hit 0 before b)`` is harmonic off ``{0, b}``.  The absorbing
construction solves the killed problem on ``[-L, L]^d`` twice, scoring an
exit from the box as a loss (lower bound) and as a win (upper bound).  In
the plane its width only shrinks like ``1/log L``, so d = 2 defaults to a
reflection construction (see :func:`reflection_bracket`) whose width decays
roughly like ``1/(L log L)``.

Each linear solve is a conjugate-gradient run on the symmetric positive
definite generator ``I - P`` restricted to the box.  Since that inverse has
sup-norm at most the largest expected exit time, ``d (L + 1)^2``, the
bounds are widened by that factor times the final residual, which keeps
them rigorous despite the iterative solve.
"""
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from ..lattice import check_dimension, unit
from .estimate import _resolve_b


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExactBracket:
    lower: float
    upper: float
    box_radius: int
    residual: float
    d: int = 2
    b: tuple = (1, 0)

    @property
    def width(self):
        return self.upper - self.lower

    @property
    def midpoint(self):
        return 0.5 * (self.lower + self.upper)

    def contains(self, p):
        return self.lower <= p <= self.upper

    def to_record(self):
        return {"method": "bracket", "d": self.d, "L": self.box_radius, "lower": self.lower,
                "upper": self.upper, "residual": self.residual}


def _cube(d, L):
    return [(-L, L)] * d


def _box_generator(ranges):
    """``I - P`` for the walk killed on leaving the box, sites in C order."""
    d = len(ranges)
    sizes = [hi - lo + 1 for lo, hi in ranges]
    adj = None
    for axis in range(d):
        term = None
        for j, n in enumerate(sizes):
            if j == axis:
                f = sp.diags([np.ones(n - 1), np.ones(n - 1)], [-1, 1], format="csr")
            else:
                f = sp.identity(n, format="csr")
            term = f if term is None else sp.kron(term, f, format="csr")
        adj = term if adj is None else adj + term
    return sp.identity(int(np.prod(sizes)), format="csr") - adj / (2 * d)


def _index(x, ranges):
    return int(np.ravel_multi_index(tuple(c - lo for c, (lo, _) in zip(x, ranges)),
                                    tuple(hi - lo + 1 for lo, hi in ranges)))


def _exit_counts(ranges):
    """Per box site, the number of its 2d steps that leave the box."""
    grids = np.meshgrid(*[np.arange(lo, hi + 1) for lo, hi in ranges], indexing="ij")
    out = np.zeros(grids[0].shape)
    for g, (lo, hi) in zip(grids, ranges):
        out += (g == lo).astype(float) + (g == hi)
    return out.ravel()


def _solve(A, rhs, tol, maxiter):
    u, info = cg(A, rhs, rtol=0.0, atol=tol * 1e-2, maxiter=maxiter)
    res = float(np.max(np.abs(A @ u - rhs)))
    if info != 0 or res > tol:
        raise SolverError(f"conjugate gradient did not reach residual {tol} (got {res:.3g})")
    return u, res


def _reduced(d, bk, ranges):
    """Generator restricted to the box minus ``{0, b}`` and the origin's one-step vector."""
    A = _box_generator(ranges)
    o = _index((0,) * d, ranges)
    bi = _index(unit(d, bk), ranges)
    keep = np.ones(A.shape[0], dtype=bool)
    keep[[o, bi]] = False
    A_int = A[keep][:, keep].tocsr()
    to_origin = -A[:, o].toarray().ravel()[keep]
    return A_int, keep, to_origin


def _origin_average(d, ranges, keep, u_int, bk):
    full = np.zeros(keep.size)
    full[keep] = u_int
    total = 0.0
    for k in range(2 * d):
        if k != bk:
            total += full[_index(unit(d, k), ranges)]
    return total / (2 * d)


def _check_box(d, L, memory_budget):
    if L < 2:
        raise ValueError("box radius must be >= 2")
    if (2 * L + 1) ** d > memory_budget:
        raise MemoryError(f"box of {(2 * L + 1) ** d} sites exceeds the budget {memory_budget}")


def absorbing_bracket(d, b=None, box_radius=20, solver_tolerance=1e-12, maxiter=None,
                      memory_budget=2_000_000):
    """Bounds from scoring a box exit as a loss (lower) or a win (upper).

    Valid in every dimension.  In d >= 3 the upper side does not tighten
    with L, because a transient walk that leaves the box usually never
    comes back; the lower side converges like ``L^(2 - d)``.
    """
    check_dimension(d)
    L = int(box_radius)
    _check_box(d, L, memory_budget)
    bk = _resolve_b(d, b)
    ranges = _cube(d, L)
    A_int, keep, src = _reduced(d, bk, ranges)
    exits = _exit_counts(ranges)[keep] / (2 * d)
    maxiter = maxiter or 50 * (2 * L + 1) * d + 1000
    u_lo, r_lo = _solve(A_int, src, solver_tolerance, maxiter)
    u_hi, r_hi = _solve(A_int, src + exits, solver_tolerance, maxiter)
    slack = d * (L + 1) ** 2
    lower = _origin_average(d, ranges, keep, u_lo, bk) - slack * r_lo
    upper = _origin_average(d, ranges, keep, u_hi, bk) + slack * r_hi
    return ExactBracket(max(0.0, float(lower)), min(1.0, float(upper)), L, max(r_lo, r_hi), d,
                        unit(d, bk))


def reflection_bracket(b=None, box_radius=20, solver_tolerance=1e-12, maxiter=None,
                       memory_budget=2_000_000):
    """Tighter planar bounds from a box symmetric under the reflection swapping 0 and b.

    With ``H(z)`` the probability that the walk from the origin leaves the
    box at ``z`` before returning to ``{0, b}``, the strong Markov property
    gives ``P(T_0 < T_b) = a_L + sum_z H(z) u(z)``.  Recurrence makes
    ``u(s z) = 1 - u(z)`` for the reflection ``s``, hence
    ``sum_z H u = e_L / 2 + sum_z D(z) (u(z) - 1/2)`` with
    ``D(z) = H(z) - H(s z)``, which lies within ``+-sum_z D(z)^+ / 2``.
    """
    d = 2
    L = int(box_radius)
    _check_box(d, L, memory_budget)
    bk = _resolve_b(d, b)
    bax, bsg = bk >> 1, (1 if bk % 2 == 0 else -1)
    ranges = _cube(d, L)
    ranges[bax] = (-L + 1, L) if bsg > 0 else (-L, L - 1)
    A_int, keep, _ = _reduced(d, bk, ranges)
    start = np.zeros(keep.size)
    for k in range(2 * d):
        if k != bk:
            start[_index(unit(d, k), ranges)] = 1.0 / (2 * d)
    maxiter = maxiter or 50 * (2 * L + 1) * d + 1000
    g_int, res = _solve(A_int, start[keep], solver_tolerance, maxiter)
    g = np.zeros(keep.size)
    g[keep] = g_int
    shape = tuple(hi - lo + 1 for lo, hi in ranges)
    grid = g.reshape(shape)
    w = 1.0 / (2 * d)
    a_L = _origin_average(d, ranges, keep, g_int, bk)
    # exit mass through each face, indexed along the face
    faces = {}
    for axis in range(d):
        faces[(axis, -1)] = np.take(grid, 0, axis=axis) * w
        faces[(axis, 1)] = np.take(grid, shape[axis] - 1, axis=axis) * w
    e_L = sum(f.sum() for f in faces.values())
    # the reflection reverses the index along b's axis and swaps the two faces normal to it
    pos = 0.0
    for (axis, side), f in faces.items():
        if axis == bax:
            mirror = faces[(axis, -side)]
        else:
            mirror = np.flip(f, axis=bax if bax < axis else bax - 1)
        pos += np.clip(f - mirror, 0.0, None).sum()
    spread = pos / 2
    slack = d * (L + 1) ** 2 * res
    n_edges = sum(f.size for f in faces.values())
    err = slack * (1.0 + 2.0 * n_edges * w)
    centre = a_L + e_L / 2
    return ExactBracket(max(0.0, float(centre - spread - err)),
                        min(1.0, float(centre + spread + err)), L, res, d, unit(d, bk))


def exact_bracket(d, b=None, box_radius=20, solver_tolerance=1e-12, maxiter=None,
                  memory_budget=2_000_000, method=None):
    """Certified bounds on ``P(T_0 < T_b)`` from a box of half-width ``box_radius``.

    ``method`` is ``"reflection"`` (d = 2 only, the default there) or
    ``"absorbing"`` (any d, the default for d >= 3).
    """
    method = method or ("reflection" if d == 2 else "absorbing")
    if method == "reflection":
        if d != 2:
            raise ValueError("the reflection bracket needs recurrence (d = 2)")
        return reflection_bracket(b, box_radius, solver_tolerance, maxiter, memory_budget)
    if method == "absorbing":
        return absorbing_bracket(d, b, box_radius, solver_tolerance, maxiter, memory_budget)
    raise ValueError(f"unknown bracket method {method!r}")


def exact_bracket_2d(b=None, box_radius=20, solver_tolerance=1e-12, method="reflection"):
    return exact_bracket(2, b, box_radius, solver_tolerance, method=method)


def exact_bracket_highd(d, b=None, box_radius=10, solver_tolerance=1e-12,
                        memory_budget=2_000_000):
    if d not in (3, 4, 5):
        raise ValueError("exact_bracket_highd covers d in {3, 4, 5}")
    return exact_bracket(d, b, box_radius, solver_tolerance, memory_budget=memory_budget)


def dense_bracket(d, b=None, box_radius=5):
    """Same two absorbing problems, assembled site by site and solved densely.

    An independent route for small boxes: no sparse algebra and no iteration.
    """
    L = int(box_radius)
    bk = _resolve_b(d, b)
    bpt = unit(d, bk)
    o = (0,) * d
    sites = [tuple(int(c) for c in x) for x in np.ndindex(*(2 * L + 1,) * d)]
    sites = [tuple(c - L for c in x) for x in sites]
    free = [x for x in sites if x != o and x != bpt]
    if len(free) > 6000:
        raise MemoryError("dense oracle limited to 6000 unknowns")
    pos = {x: i for i, x in enumerate(free)}
    A = np.eye(len(free))
    src = np.zeros(len(free))
    esc = np.zeros(len(free))
    w = 1.0 / (2 * d)
    for x, i in pos.items():
        for k in range(2 * d):
            e = unit(d, k)
            y = tuple(a + c for a, c in zip(x, e))
            if y == o:
                src[i] += w
            elif y == bpt:
                pass
            elif max(abs(c) for c in y) > L:
                esc[i] += w
            else:
                A[i, pos[y]] -= w
    u_lo = np.linalg.solve(A, src)
    u_hi = np.linalg.solve(A, src + esc)

    def start(u):
        s = 0.0
        for k in range(2 * d):
            y = unit(d, k)
            if y != bpt:
                s += u[pos[y]]
        return s * w

    return start(u_lo), start(u_hi)


def extrapolated_estimate(d, b=None, radii=(10, 20), solver_tolerance=1e-12):
    """Point value for ``P(T_0 < T_b)`` from lower bounds at two box sizes.

    The lower bound misses only walks that leave the box and later come back;
    in d >= 3 that mass decays like ``L^(2 - d)``, so one Richardson step
    with that exponent removes the leading error.  In d = 2 the two bounds
    squeeze the value and the finer bracket's midpoint is returned instead.
    """
    small, large = (exact_bracket(d, b, r, solver_tolerance) for r in radii)
    if d == 2:
        return large.midpoint, (small, large)
    ratio = (radii[1] / radii[0]) ** (d - 2)
    value = (ratio * large.lower - small.lower) / (ratio - 1)
    return value, (small, large)


def certified_beta_interval(bracket):
    """Interval of ``1/(-log p)`` implied by a bracket (monotone in p)."""
    lo = 1.0 / -math.log(bracket.lower) if 0 < bracket.lower < 1 else 0.0
    hi = 1.0 / -math.log(bracket.upper) if 0 < bracket.upper < 1 else math.inf
    return lo, hi
