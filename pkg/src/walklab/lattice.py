"""Lattice points, nearest neighbours and simple random walk paths.

Points are plain tuples of ints.  Unit directions are indexed in the
canonical order ``+e1, -e1, +e2, -e2, ...``: index ``k`` moves along axis
``k // 2`` by ``+1`` when ``k`` is even and ``-1`` when odd.
"""
from dataclasses import dataclass

import numpy as np

SUPPORTED_DIMENSIONS = (2, 3, 4, 5)
HORIZON_CAP = 2 ** 32


def check_dimension(d):
    if d not in SUPPORTED_DIMENSIONS:
        raise ValueError(f"dimension must be one of {SUPPORTED_DIMENSIONS}, got {d!r}")
    return d


def origin(d):
    return (0,) * check_dimension(d)


def unit(d, k):
    """Unit vector with direction index ``k``."""
    if not 0 <= k < 2 * d:
        raise ValueError(f"direction index must lie in [0, {2 * d}), got {k}")
    v = [0] * d
    v[k // 2] = 1 if k % 2 == 0 else -1
    return tuple(v)


def unit_vectors(d):
    return np.array([unit(d, k) for k in range(2 * d)], dtype=np.int64)


def direction_index(b):
    """Inverse of :func:`unit`."""
    b = tuple(int(c) for c in b)
    nz = [i for i, c in enumerate(b) if c != 0]
    if len(nz) != 1 or abs(b[nz[0]]) != 1:
        raise ValueError(f"{b} is not a unit direction")
    i = nz[0]
    return 2 * i + (0 if b[i] == 1 else 1)


def add(x, y):
    return tuple(a + b for a, b in zip(x, y))


def neighbors(x):
    """The 2d nearest neighbours of ``x`` in canonical direction order."""
    out = []
    for i, c in enumerate(x):
        for s in (1, -1):
            y = list(x)
            y[i] = c + s
            out.append(tuple(y))
    return out


def is_adjacent(x, y):
    return sum(abs(a - b) for a, b in zip(x, y)) == 1 and len(x) == len(y)


def step(x, rng):
    """One simple-random-walk step from ``x``."""
    k = rng.direction(len(x))
    y = list(x)
    y[k // 2] += 1 if k % 2 == 0 else -1
    return tuple(y)


@dataclass(frozen=True)
class WalkPath:
    """A materialised walk ``S_0, ..., S_n`` stored as an ``(n + 1, d)`` array."""

    points: np.ndarray

    @property
    def d(self):
        return self.points.shape[1]

    @property
    def n(self):
        return self.points.shape[0] - 1

    def __len__(self):
        return self.points.shape[0]

    def __getitem__(self, j):
        return tuple(int(c) for c in self.points[j])

    def as_tuples(self):
        return [tuple(p) for p in self.points.tolist()]

    def check(self):
        """Raise if the path does not start at the origin or has a non-unit increment."""
        if np.any(self.points[0] != 0):
            raise ValueError("path does not start at the origin")
        inc = np.abs(np.diff(self.points, axis=0)).sum(axis=1)
        bad = np.flatnonzero(inc != 1)
        if bad.size:
            raise ValueError(f"non-unit increment at step {bad[0] + 1}")
        return self


def path_from_directions(d, dirs):
    steps = unit_vectors(d)[np.asarray(dirs, dtype=np.int64)]
    pts = np.zeros((len(steps) + 1, d), dtype=np.int64)
    np.cumsum(steps, axis=0, out=pts[1:])
    return WalkPath(pts)


def path_from_points(points):
    """Build and validate a path from an explicit point sequence."""
    return WalkPath(np.asarray(points, dtype=np.int64).reshape(len(points), -1)).check()


def generate_walk(d, n, rng, horizon_cap=HORIZON_CAP):
    check_dimension(d)
    if n < 0:
        raise ValueError("n must be non-negative")
    if n > horizon_cap:
        raise ValueError(f"n={n} exceeds the horizon cap {horizon_cap}")
    return path_from_directions(d, rng.directions(d, n))
