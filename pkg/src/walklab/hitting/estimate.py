"""Monte Carlo estimates of hitting and escape probabilities from the origin."""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.stats import norm

from ..lattice import check_dimension, direction_index, unit
from . import montecarlo as mc
from .jumps import MAX_LEVEL, jump_tables

BLOCK = 1 << 15
Z95 = 1.959963984540054


class Target(str, Enum):
    RETURN_BEFORE_NEIGHBOR = "return-before-neighbor"
    TRUNCATED_RETURN = "truncated-return"
    RETURN_TAIL = "return-tail"
    NEIGHBOR_TAIL = "neighbor-tail"
    JOINT_TAIL = "joint-tail"


class CutoffKind(str, Enum):
    STEP_CAP = "step-cap"
    RADIUS_CAP = "radius-cap"
    NONE = "none"


@dataclass(frozen=True)
class CutoffPolicy:
    kind: CutoffKind = CutoffKind.NONE
    value: int = 0

    @classmethod
    def radius(cls, r):
        return cls(CutoffKind.RADIUS_CAP, int(r))

    @classmethod
    def steps(cls, k):
        return cls(CutoffKind.STEP_CAP, int(k))

    def to_dict(self):
        return {"kind": CutoffKind(self.kind).value, "value": self.value}


NO_CUTOFF = CutoffPolicy()


@dataclass
class HittingEstimate:
    """Point estimate with a 95% half-width.

    ``lower`` and ``upper`` are the pessimistic and optimistic scorings of
    trials stopped by the cutoff (equal to ``probability`` when the event is
    always decided).
    """

    probability: float
    half_width: float
    trials: int
    cutoff: CutoffPolicy
    target: Target
    d: int
    b: tuple
    lower: float
    upper: float
    successes: int = 0
    undecided: int = 0
    param: int = None

    @property
    def interval(self):
        return self.probability - self.half_width, self.probability + self.half_width

    def to_record(self):
        rec = {
            "target": Target(self.target).value,
            "d": self.d,
            "b": list(self.b),
            "cutoff": self.cutoff.to_dict(),
            "trials": self.trials,
            "p_hat": self.probability,
            "half_width": self.half_width,
        }
        if self.param is not None:
            rec["param"] = self.param
        if self.lower != self.upper:
            rec["lower"] = self.lower
            rec["upper"] = self.upper
        return rec


def wilson_half_width(successes, trials, z=Z95):
    p = successes / trials
    denom = 1 + z * z / trials
    return z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom


def binomial_half_width(successes, trials, z=Z95):
    """Normal-approximation half-width, switching to Wilson when fewer than
    ten successes or failures make the normal law unreliable."""
    if min(successes, trials - successes) < 10:
        return wilson_half_width(successes, trials, z)
    p = successes / trials
    return z * math.sqrt(p * (1 - p) / trials)


def joint_z(k, level=0.95):
    """Two-sided Bonferroni critical value for ``k`` simultaneous comparisons."""
    return float(norm.ppf(1 - (1 - level) / (2 * k)))


def _resolve_b(d, b):
    if b is None:
        return 0
    if isinstance(b, (int, np.integer)):
        if not 0 <= b < 2 * d:
            raise ValueError(f"direction index must lie in [0, {2 * d})")
        return int(b)
    if len(b) != d:
        raise ValueError("neighbour has the wrong dimension")
    return direction_index(b)


def _blocks(trials):
    if trials < 1:
        raise ValueError("trials must be >= 1")
    sizes = [BLOCK] * (trials // BLOCK)
    if trials % BLOCK:
        sizes.append(trials % BLOCK)
    return sizes


def _farm(fn, rng, trials, threads):
    """Run ``fn(stream, size)`` over fixed trial blocks; block ``i`` uses ``rng.spawn(i)``.

    The block layout depends only on ``trials``, so results do not depend on
    ``threads``.
    """
    sizes = _blocks(trials)
    jobs = [(rng.spawn(i), s) for i, s in enumerate(sizes)]
    if threads <= 1 or len(jobs) == 1:
        return [fn(st, s) for st, s in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def estimate_return_before_neighbor(d, b=None, cutoff=None, trials=10 ** 5, rng=None,
                                    threads=1):
    """Estimate ``P(T_0 < T_b)`` for a walk from the origin.

    Trials stopped by the cutoff are counted as failures for ``lower`` and as
    successes for ``upper``.  The point estimate is their midpoint in d = 2,
    where a walk released far away hits either of two adjacent sites first
    with probability tending to 1/2; in d >= 3 it is ``lower``, since a walk
    released at radius r returns at all with probability O(r^(2-d)).
    """
    check_dimension(d)
    cutoff = NO_CUTOFF if cutoff is None else cutoff
    kind = CutoffKind(cutoff.kind)
    if kind is CutoffKind.NONE and d >= 3:
        raise ValueError("a cutoff is required in transient dimensions (d >= 3)")
    if kind is not CutoffKind.NONE and cutoff.value < 1:
        raise ValueError("cutoff value must be positive")
    bk = _resolve_b(d, b)
    offsets, thresh, alias = jump_tables(d)
    max_level = MAX_LEVEL[d]
    cap_kind = {CutoffKind.NONE: mc.CAP_NONE, CutoffKind.STEP_CAP: mc.CAP_STEPS,
                CutoffKind.RADIUS_CAP: mc.CAP_RADIUS}[kind]

    def run(stream, size):
        return mc.return_before_neighbor_block(stream.addr, stream.pool, d, bk, cap_kind,
                                               cutoff.value, size, offsets, thresh, alias,
                                               max_level)

    parts = np.array(_farm(run, rng, trials, threads), dtype=np.int64).sum(axis=0)
    ret, hitb, cut = (int(v) for v in parts)
    lower = ret / trials
    upper = (ret + cut) / trials
    if cut == 0:
        p, hw = lower, binomial_half_width(ret, trials)
    elif d == 2:
        p = (lower + upper) / 2
        # per-trial scores in {0, 1/2, 1}
        var = (ret + 0.25 * cut) / trials - p * p
        hw = max(Z95 * math.sqrt(max(var, 0.0) / trials), wilson_half_width(ret, trials) if ret < 10 else 0.0)
    else:
        p, hw = lower, binomial_half_width(ret, trials)
    return HittingEstimate(p, hw, trials, cutoff, Target.RETURN_BEFORE_NEIGHBOR, d,
                           unit(d, bk), lower, upper, ret, cut)


def estimate_truncated(d, b=None, k=1, trials=10 ** 5, rng=None, threads=1):
    """Estimate ``P(T_0 < min(T_b, k))``; the event is decided by step ``k - 1``."""
    check_dimension(d)
    if k < 1:
        raise ValueError("k must be >= 1")
    bk = _resolve_b(d, b)

    def run(stream, size):
        return mc.truncated_block(stream.addr, stream.pool, d, bk, k, size)

    hits = int(sum(_farm(run, rng, trials, threads)))
    p = hits / trials
    return HittingEstimate(p, binomial_half_width(hits, trials), trials, NO_CUTOFF,
                           Target.TRUNCATED_RETURN, d, unit(d, bk), p, p, hits, 0, k)


def first_time_histograms(d, b=None, horizon=1, trials=10 ** 5, rng=None, threads=1,
                          need=("T0", "Tb"), stop_on_first=False):
    """Summed histograms of capped ``T_0``, ``T_b`` and ``T_0 ^ T_b`` over all trials."""
    check_dimension(d)
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    bk = _resolve_b(d, b)
    need0 = "T0" in need
    needb = "Tb" in need

    def run(stream, size):
        return mc.first_times_block(stream.addr, stream.pool, d, bk, horizon, size,
                                    need0, needb, stop_on_first)

    parts = _farm(run, rng, trials, threads)
    return tuple(sum(p[i] for p in parts) for i in range(3))


def survival(hist):
    """``P(T > m)`` for ``m = 0..horizon`` from a histogram of capped times."""
    total = hist.sum()
    return 1.0 - np.cumsum(hist)[:-1] / total


_TAIL_KEY = {Target.RETURN_TAIL: 0, Target.NEIGHBOR_TAIL: 1, Target.JOINT_TAIL: 2}


def estimate_tail(d, target, m, trials=10 ** 5, rng=None, cutoff=None, b=None, threads=1):
    """Estimate ``P(T > m)`` for ``T`` in ``{T_0, T_b, T_0 ^ T_b}``.

    The event is decided by step ``m``, so ``cutoff`` is accepted for
    interface symmetry and only recorded.
    """
    target = Target(target)
    if target not in _TAIL_KEY:
        raise ValueError(f"{target} is not a tail target")
    if m < 0:
        raise ValueError("m must be >= 0")
    need = {Target.RETURN_TAIL: ("T0",), Target.NEIGHBOR_TAIL: ("Tb",),
            Target.JOINT_TAIL: ("T0", "Tb")}[target]
    hists = first_time_histograms(d, b, m, trials, rng, threads, need,
                                  stop_on_first=target is Target.JOINT_TAIL)
    hist = hists[_TAIL_KEY[target]]
    survivors = int(hist[m + 1])
    p = survivors / trials
    return HittingEstimate(p, binomial_half_width(survivors, trials), trials,
                           cutoff or NO_CUTOFF, target, d, unit(d, _resolve_b(d, b)), p, p,
                           survivors, 0, m)


def tail_identity_table(d, b=None, grid=None, trials=10 ** 5, rng=None, threads=1, level=0.95):
    """Compare ``P(T_0 >= a + 1)`` with ``P(T_b >= a)`` on a grid of ``a`` values.

    Both tails come from the same walks; the band uses the independent-sample
    joint standard error (conservative here, the two tails being positively
    correlated) with a Bonferroni critical value over the grid.
    """
    grid = [2 ** j for j in range(11)] if grid is None else list(grid)
    horizon = max(grid) + 1
    h0, hb, _ = first_time_histograms(d, b, horizon, trials, rng, threads)
    s0 = survival(h0)
    sb = survival(hb)
    z = joint_z(len(grid), level)
    rows = []
    for a in grid:
        p0 = s0[a]          # T_0 > a  <=>  T_0 >= a + 1
        pb = sb[a - 1] if a >= 1 else 1.0  # T_b > a - 1  <=>  T_b >= a
        se = math.sqrt((p0 * (1 - p0) + pb * (1 - pb)) / trials)
        rows.append({"a": a, "p_return": float(p0), "p_neighbor": float(pb),
                     "diff": float(p0 - pb), "band": z * se, "ok": abs(p0 - pb) <= z * se})
    return rows


def h_k(beta, p_truncated):
    """``beta * log P(T_0 < T_b ^ k) + 1``."""
    if not 0.0 < p_truncated < 1.0:
        raise ValueError("p_truncated must lie in (0, 1)")
    if beta <= 0:
        raise ValueError("beta must be positive")
    return beta * math.log(p_truncated) + 1.0


def classify_path(path, b):
    """Decide the race between ``T_0`` and ``T_b`` on a materialised path.

    Returns ``"return"``, ``"neighbor"`` or ``None`` when neither site is
    reached after time 0.
    """
    b = tuple(b)
    o = (0,) * path.d
    for j in range(1, len(path)):
        p = path[j]
        if p == o:
            return "return"
        if p == b:
            return "neighbor"
    return None

