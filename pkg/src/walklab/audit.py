"""Property sweeps for the range tracker: incremental vs from-scratch state and interval nesting."""
from dataclasses import dataclass, field

from .lattice import generate_walk, unit
from .rng import RngStream
from .tracker import recompute_from_scratch, track_path


def nesting_violations(path, i0, i1, i2, b=None):
    """Sites of ``R(I0)`` on the boundary of ``R(I2)`` but not of ``R(I1)``.

    With ``b`` given the directional boundary ``{x : x + b not in A}`` is
    used instead.  Intervals are ``(l, n)`` pairs with ``I0 <= I1 <= I2``.
    """
    for inner, outer in ((i0, i1), (i1, i2)):
        if not (outer[0] <= inner[0] and inner[1] <= outer[1]):
            raise ValueError(f"intervals are not nested: {inner} within {outer}")
    r0, r1, r2 = (recompute_from_scratch(path, l, n) for l, n in (i0, i1, i2))
    if b is None:
        on2 = r2.is_inner_boundary
        on1 = r1.is_inner_boundary
    else:
        on2 = lambda x: r2.is_directional_boundary(x, b)  # noqa: E731
        on1 = lambda x: r1.is_directional_boundary(x, b)  # noqa: E731
    return [x for x in r0.sites if on2(x) and not on1(x)]


def _draw_intervals(rng, n):
    cut = sorted(int(rng.next_uint64() % (n + 1)) for _ in range(6))
    return (cut[2], cut[3]), (cut[1], cut[4]), (cut[0], cut[5])


@dataclass
class AuditReport:
    paths: int = 0
    mismatches: list = field(default_factory=list)
    nesting_checked: int = 0
    nesting_failures: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.mismatches and not self.nesting_failures

    def to_dict(self):
        return {"paths": self.paths, "mismatches": len(self.mismatches),
                "nesting_checked": self.nesting_checked,
                "nesting_failures": len(self.nesting_failures), "ok": self.ok}


def audit_sweep(d, paths=1000, length=1000, seed=0, nesting=True):
    """Compare the incremental tracker with full recomputation on random paths.

    Every path also gets one random triple of nested intervals, checked for
    the plain boundary and for every directional boundary.
    """
    report = AuditReport()
    for i in range(paths):
        rng = RngStream(seed, i)
        path = generate_walk(d, length, rng)
        state = track_path(path)
        state.audit()
        ref = recompute_from_scratch(path, 0, length)
        if ref.signature() != state.signature():
            report.mismatches.append(i)
        report.paths += 1
        if nesting:
            i0, i1, i2 = _draw_intervals(rng, length)
            for b in [None] + [unit(d, k) for k in range(2 * d)]:
                bad = nesting_violations(path, i0, i1, i2, b)
                report.nesting_checked += 1
                if bad:
                    report.nesting_failures.append((i, i0, i1, i2, b, bad[:3]))
    return report


def enumeration_audit(d, n):
    """Tracker vs recomputation on every path of length ``n`` (exhaustive)."""
    from .oracle import histograms

    histograms(d, n, engine="tracker", audit=True)
    return (2 * d) ** n
