"""Exact box-exit laws used to accelerate long excursions.

A walk started at the centre of the box ``[-m, m]^d`` first leaves the
open box through one of its 2d faces, each with probability 1/(2d), and
within a face its position follows the lattice harmonic measure.  That
measure is the box Green's function at the face-adjacent layer divided by
2d; the Green's function of the Dirichlet generator is diagonal in the
type-I discrete sine basis, so one pair of DSTs gives it exactly.

Replacing the step-by-step path inside such a box by a single draw from
this law is exact in distribution whenever the box interior contains no
target and lies inside the escape radius.
"""
from functools import lru_cache

import numpy as np
from scipy.fft import dstn

# largest power-of-two half-width tabulated per dimension
MAX_LEVEL = {2: 10, 3: 6, 4: 4, 5: 3}


def face_exit_law(d, m):
    """Exit probabilities over the face ``x_1 = m``, conditioned on that face.

    Returns an array of shape ``(2m-1,) * (d-1)`` indexed by the remaining
    coordinates shifted by ``m - 1``; it sums to one.
    """
    if m < 1:
        raise ValueError("half-width must be positive")
    n = 2 * m - 1
    delta = np.zeros((n,) * d)
    delta[(m - 1,) * d] = 1.0
    k = np.arange(1, n + 1) * np.pi / (2 * m)
    cos = np.cos(k)
    lam = np.ones((n,) * d)
    for axis in range(d):
        shape = [1] * d
        shape[axis] = n
        lam = lam - cos.reshape(shape) / d
    green = dstn(dstn(delta, type=1, norm="ortho") / lam, type=1, norm="ortho")
    face = np.clip(green[-1], 0.0, None) / (2 * d)
    total = face.sum()
    if abs(total * 2 * d - 1.0) > 1e-9:
        raise RuntimeError(f"box exit law does not normalise (d={d}, m={m}): {total * 2 * d}")
    return face / total


def alias_table(prob):
    """Vose alias table ``(threshold, alias)`` for a discrete law."""
    prob = np.asarray(prob, dtype=np.float64).ravel()
    k = prob.size
    scaled = prob * k / prob.sum()
    thresh = np.ones(k)
    alias = np.arange(k, dtype=np.int64)
    small = [i for i in range(k) if scaled[i] < 1.0]
    large = [i for i in range(k) if scaled[i] >= 1.0]
    while small and large:
        s = small.pop()
        g = large.pop()
        thresh[s] = scaled[s]
        alias[s] = g
        scaled[g] -= 1.0 - scaled[s]
        (small if scaled[g] < 1.0 else large).append(g)
    return thresh, alias


@lru_cache(maxsize=None)
def jump_tables(d, max_level=None):
    """Concatenated alias tables for half-widths ``2, 4, ..., 2**max_level``.

    Returns ``(offsets, thresh, alias)``; level ``j`` (half-width ``2**j``)
    occupies ``[offsets[j], offsets[j + 1])``.  Level 0 is unused.
    """
    top = MAX_LEVEL[d] if max_level is None else max_level
    offsets = np.zeros(top + 2, dtype=np.int64)
    ths = []
    als = []
    pos = 0
    for j in range(top + 1):
        offsets[j] = pos
        if j == 0:
            continue
        t, a = alias_table(face_exit_law(d, 2 ** j))
        ths.append(t)
        als.append(a)
        pos += t.size
    offsets[top + 1] = pos
    return offsets, np.concatenate(ths), np.concatenate(als)
