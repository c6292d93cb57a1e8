"""Trial farms over long walks: raw per-trial rows, aggregates, summary and report.

Output files are a pure function of the configuration without ``threads``
and ``output_dir``: trial ``t`` always uses stream ``t`` of the master seed
and rows are written in trial order once every trial has finished.
"""
import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .fastrange import walk_statistics
from .lattice import SUPPORTED_DIMENSIONS
from .rng import RngStream
from .statistics import BetaConstant, BetaSource

HORIZON_CAPS = {2: 2 ** 24, 3: 2 ** 22, 4: 2 ** 22, 5: 2 ** 22}
# the return bias of a radius cap r decays like r^(2-d), so higher d affords smaller caps
DEFAULT_CUTOFF_RADIUS = {2: 10 ** 4, 3: 10 ** 3, 4: 200, 5: 100}
BETA_STREAM = 2 ** 63  # stream id reserved for the Monte Carlo beta estimate
L_BAND_LIMIT = (math.pi ** 2 / 2, 2 * math.pi ** 2)
L_BAND = (3.0, 25.0)
M_BAND_D2 = (0.7, 1.6)
M_TOLERANCE_HIGHD = 0.35
THETA_BAND = (0.3, 0.7)
J_TOLERANCE = 0.1
RATIO_CONVENTION = ("ratio convention: L_ratio and J ratios are ratios of trial means; "
                    "M, M0 and theta ratios are means of per-trial ratios with log(max(theta, 1))")


class ConfigError(ValueError):
    pass


def fmt(x):
    """17 significant digits, the round-trip precision of a double."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x != x:
        return "nan"
    return format(float(x), ".17g")


def default_checkpoints(horizon):
    cps = [2 ** j for j in range(4, 63) if 2 ** j <= horizon]
    if not cps or cps[-1] != horizon:
        cps.append(horizon)
    return cps


@dataclass
class ExperimentConfig:
    d: int = 2
    horizon: int = 2 ** 20
    checkpoints: list = None
    trials: int = 100
    master_seed: int = 0
    deltas: list = field(default_factory=lambda: [0.25, 0.5, 0.75])
    ps: list = field(default_factory=lambda: [1, 2, 3, 4, 5, 6])
    theta_tilde_betas: list = None
    beta_source: dict = None
    output_dir: str = "walklab-out"
    threads: int = 1

    def __post_init__(self):
        if self.checkpoints is None and isinstance(self.horizon, int) and self.horizon >= 16:
            self.checkpoints = default_checkpoints(self.horizon)

    @classmethod
    def from_dict(cls, raw):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: not valid JSON ({exc})") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return cls.from_dict(raw)

    def validate(self):
        if self.d not in SUPPORTED_DIMENSIONS:
            raise ConfigError(f"d must be one of {SUPPORTED_DIMENSIONS}")
        if not isinstance(self.horizon, int) or self.horizon < 2:
            raise ConfigError("horizon must be an integer >= 2")
        if self.horizon > HORIZON_CAPS[self.d]:
            raise ConfigError(f"horizon {self.horizon} exceeds the d={self.d} cap "
                              f"{HORIZON_CAPS[self.d]}")
        cps = self.checkpoints
        if not cps:
            raise ConfigError("at least one checkpoint is required")
        if any(not isinstance(c, int) for c in cps):
            raise ConfigError("checkpoints must be integers")
        if any(b <= a for a, b in zip(cps, cps[1:])):
            raise ConfigError("checkpoints must be strictly increasing")
        if cps[0] < 2 or cps[-1] > self.horizon:
            raise ConfigError("checkpoints must lie in [2, horizon]")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not isinstance(self.master_seed, int) or not 0 <= self.master_seed < 2 ** 64:
            raise ConfigError("master_seed must be an unsigned 64-bit integer")
        if any(not 0.0 < dl < 1.0 for dl in self.deltas):
            raise ConfigError("deltas must lie in (0, 1)")
        if any(not isinstance(p, int) or p < 1 for p in self.ps):
            raise ConfigError("ps must be integers >= 1")
        if self.theta_tilde_betas and any(b <= 0 for b in self.theta_tilde_betas):
            raise ConfigError("theta_tilde_betas must be positive")
        if not isinstance(self.threads, int) or self.threads < 1:
            raise ConfigError("threads must be >= 1")
        beta_options(self)
        return self

    def echo(self):
        """Configuration as recorded in outputs (speed-only fields dropped)."""
        out = asdict(self)
        out.pop("threads")
        out.pop("output_dir")
        out["beta_source"] = beta_options(self)
        return out


def beta_options(cfg):
    """Fully defaulted beta source description for ``cfg``."""
    opts = dict(cfg.beta_source or {})
    kind = opts.get("kind", "exact-bracket" if cfg.d == 2 else "monte-carlo")
    try:
        kind = BetaSource(kind).value
    except ValueError:
        raise ConfigError(f"unknown beta source {kind!r}") from None
    opts["kind"] = kind
    if kind == "exact-bracket":
        opts.setdefault("box_radius", 80 if cfg.d == 2 else 40)
        allowed = {"kind", "box_radius"}
    elif kind == "monte-carlo":
        opts.setdefault("trials", 10 ** 5)
        opts.setdefault("cutoff_radius", DEFAULT_CUTOFF_RADIUS[cfg.d])
        allowed = {"kind", "trials", "cutoff_radius"}
    else:
        if ("value" in opts) == ("p" in opts):
            raise ConfigError("a user-supplied beta needs exactly one of 'value' or 'p'")
        allowed = {"kind", "value", "p"}
    extra = sorted(set(opts) - allowed)
    if extra:
        raise ConfigError(f"unknown beta_source keys: {', '.join(extra)}")
    return opts


def resolve_beta(cfg, threads=1):
    """The BetaConstant used for Theta thresholds.

    The d = 2 exact bracket gives its midpoint; in d >= 3 the bracket's
    upper side does not close, so the value comes from two-radius
    extrapolation of its lower side.  Monte Carlo runs use the pessimistic
    scoring of capped walks (see the hitting estimator).
    """
    from .hitting.bracket import exact_bracket, extrapolated_estimate
    from .hitting.estimate import CutoffPolicy, estimate_return_before_neighbor
    opts = beta_options(cfg)
    kind = opts["kind"]
    if kind == "exact-bracket":
        L = int(opts["box_radius"])
        if cfg.d == 2:
            p = exact_bracket(2, None, L).midpoint
        else:
            p, _ = extrapolated_estimate(cfg.d, None, (L // 2, L))
        return BetaConstant.from_probability(p, BetaSource.EXACT_BRACKET)
    if kind == "monte-carlo":
        est = estimate_return_before_neighbor(
            cfg.d, None, CutoffPolicy.radius(opts["cutoff_radius"]), int(opts["trials"]),
            RngStream(cfg.master_seed, BETA_STREAM), threads)
        return BetaConstant.from_probability(est.probability, BetaSource.MONTE_CARLO)
    if "p" in opts:
        return BetaConstant.from_probability(float(opts["p"]), BetaSource.USER_SUPPLIED)
    value = float(opts["value"])
    if value <= 0:
        raise ConfigError("beta value must be positive")
    return BetaConstant(value, BetaSource.USER_SUPPLIED, math.exp(-1.0 / value))


def raw_columns(cfg):
    return (["n", "trial", "M", "M0", "L", "range_size"]
            + [f"theta_{dl!r}" for dl in cfg.deltas]
            + [f"J_{p}" for p in cfg.ps]
            + [f"thetatilde_{b!r}" for b in (cfg.theta_tilde_betas or [])])


def _trial_rows(cfg, beta, t):
    """Per-checkpoint rows of trial ``t`` in raw.csv column order."""
    stats, tracked_L = walk_statistics(RngStream(cfg.master_seed, t), cfg.d, cfg.checkpoints,
                                       beta, cfg.deltas, cfg.ps, cfg.theta_tilde_betas or ())
    if not np.array_equal(stats[:, 2], tracked_L):
        raise RuntimeError(f"trial {t}: incremental boundary count drifted from the recount")
    if np.any(stats[:, 0] > stats[:, 1]):
        raise RuntimeError(f"trial {t}: M exceeds M0")
    if np.any(np.diff(stats[:, 1]) < 0) or np.any(np.diff(stats[:, 3]) < 0):
        raise RuntimeError(f"trial {t}: M0 or range size decreased between checkpoints")
    npj, nth = len(cfg.ps), len(cfg.deltas)
    order = ([0, 1, 2, 3] + list(range(4 + npj, 4 + npj + nth)) + list(range(4, 4 + npj))
             + list(range(4 + npj + nth, stats.shape[1])))
    body = stats[:, order]
    n = np.asarray(cfg.checkpoints, dtype=np.int64)[:, None]
    return np.hstack([n, np.full_like(n, t), body])


def simulate(cfg, beta, threads=None):
    """All trials as one integer array ``(trials * checkpoints, columns)`` in canonical order."""
    threads = cfg.threads if threads is None else threads
    work = lambda t: _trial_rows(cfg, beta, t)  # noqa: E731
    if threads > 1 and cfg.trials > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(work, range(cfg.trials)))
    else:
        blocks = [work(t) for t in range(cfg.trials)]
    return np.vstack(blocks)


def _mean_se(x):
    x = np.asarray(x, dtype=np.float64)
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return mean, se


def aggregate(raw, columns, cfg, beta):
    """One summary record per checkpoint; see RATIO_CONVENTION."""
    col = {c: i for i, c in enumerate(columns)}
    out = []
    prev = None
    for n in cfg.checkpoints:
        rows = raw[raw[:, 0] == n]
        rec = {"n": int(n), "trials": int(rows.shape[0])}
        for c in columns[2:]:
            v = rows[:, col[c]]
            mean, se = _mean_se(v)
            rec[c] = {"mean": mean, "se": se, "min": int(v.min()), "max": int(v.max())}
        logn = math.log(n)
        M = rows[:, col["M"]].astype(float)
        M0 = rows[:, col["M0"]].astype(float)
        m_ratio = M / logn
        rec["M_over_log_n"] = dict(zip(("mean", "se"), _mean_se(m_ratio)))
        # same trials in the same order at every checkpoint, so differences pair up
        rec["M_over_log_n"]["diff_se"] = _mean_se(m_ratio - prev)[1] if prev is not None else 0.0
        prev = m_ratio
        m0_scale = logn ** 2 if cfg.d == 2 else logn
        rec["M0_ratio"] = dict(zip(("mean", "se"), _mean_se(M0 / m0_scale)))
        rec["strict_M0_gt_M"] = float(np.mean(M0 > M))
        rec["M_le_M0"] = bool(np.all(M <= M0))
        for dl in cfg.deltas:
            th = rows[:, col[f"theta_{dl!r}"]].astype(float)
            r = np.log(np.maximum(th, 1.0)) / logn
            rec[f"log_theta_ratio_{dl!r}"] = dict(zip(("mean", "se"), _mean_se(r)))
        Lmean = rec["L"]["mean"]
        rec["L_ratio"] = Lmean * logn ** 2 / n
        ratios = {}
        for p, q in zip(cfg.ps, cfg.ps[1:]):
            if q == p + 1:
                a = rec[f"J_{p}"]["mean"]
                ratios[str(p)] = rec[f"J_{q}"]["mean"] / a if a > 0 else float("nan")
        rec["J_ratio"] = ratios
        rec["J_ratio_fit"] = fit_geometric_ratio(
            [p for p in cfg.ps if p <= 5], [rec[f"J_{p}"]["mean"] for p in cfg.ps if p <= 5])
        rec["beta_threshold"] = {repr(dl): beta.value * dl * logn for dl in cfg.deltas}
        out.append(rec)
    return out


def fit_geometric_ratio(ps, means):
    """Least-squares ``r`` in ``log J(p) = a + p log r``; nan when fewer than two positive points."""
    pts = [(p, math.log(m)) for p, m in zip(ps, means) if m > 0]
    if len(pts) < 2:
        return float("nan")
    x = np.array([p for p, _ in pts], dtype=float)
    y = np.array([v for _, v in pts])
    slope = np.polyfit(x, y, 1)[0]
    return float(math.exp(slope))


def _tail_checkpoints(aggs, k):
    return aggs[-k:] if len(aggs) >= k else aggs


def pass_flags(aggs, d, beta, deltas):
    """Acceptance-band verdicts computable from the aggregates alone."""
    if len(aggs) < 3:
        raise ValueError("convergence checks need at least three checkpoints")
    last = aggs[-1]
    flags = {"M_le_M0_all_rows": all(a["M_le_M0"] for a in aggs)}
    m_last = last["M_over_log_n"]["mean"]
    if d == 2:
        flags["M_over_log_n_band"] = M_BAND_D2[0] <= m_last <= M_BAND_D2[1]
    else:
        flags["M_over_log_n_band"] = abs(m_last - beta.value) <= M_TOLERANCE_HIGHD
    tail = _tail_checkpoints(aggs, 5)
    flags["M_over_log_n_nondecreasing"] = all(
        b["M_over_log_n"]["mean"] >= a["M_over_log_n"]["mean"] - b["M_over_log_n"]["diff_se"]
        for a, b in zip(tail, tail[1:]))
    ds = sorted(deltas)
    flags["theta_decreasing_in_delta"] = all(
        all(a[f"log_theta_ratio_{x!r}"]["mean"] > a[f"log_theta_ratio_{y!r}"]["mean"]
            for x, y in zip(ds, ds[1:]))
        for a in aggs)
    if d == 2:
        if 0.5 in deltas:
            v = last["log_theta_ratio_0.5"]["mean"]
            flags["theta_half_band"] = THETA_BAND[0] <= v <= THETA_BAND[1]
        flags["L_ratio_band"] = all(L_BAND[0] <= a["L_ratio"] <= L_BAND[1]
                                    for a in _tail_checkpoints(aggs, 3))
        r = last["J_ratio_fit"]
        flags["J_ratio_geometric"] = bool(abs(r - beta.p_estimate) <= J_TOLERANCE)
        flags["strict_M0_gt_M_majority"] = last["strict_M0_gt_M"] >= 0.5
    return flags


def targets(d, beta, deltas):
    out = {"beta_d": beta.value, "c_tilde": beta.p_estimate,
           "log_theta_ratio": {repr(dl): 1.0 - dl for dl in deltas}}
    if d == 2:
        out["L_ratio_band_limit"] = list(L_BAND_LIMIT)
        out["L_ratio_band_accept"] = list(L_BAND)
        out["M_over_log_n_band"] = list(M_BAND_D2)
    return out


def _f(v):
    return f"{v:>8.4f}" if v is not None else f"{'nan':>8}"


def convergence_report(summary):
    """Plain-text tables of every derived ratio with targets and verdicts."""
    aggs = summary["per_checkpoint"]
    cfg = summary["config_echo"]
    if len(aggs) < 3:
        raise ValueError("convergence report needs at least three checkpoints")
    beta = summary["beta_constant"]
    d = cfg["d"]
    deltas = cfg["deltas"]
    tg = summary["targets"]
    buf = io.StringIO()
    w = buf.write
    w(f"walklab convergence report  d={d}  trials={cfg['trials']}  seed={cfg['master_seed']}\n")
    w(f"beta_d = {beta['value']:.6f}  (source {beta['source']}, P(T0<Tb) = "
      f"{beta['p_estimate']:.6f})\n")
    w(f"{RATIO_CONVENTION}\n\n")
    m0_label = "M0/log^2 n" if d == 2 else "M0/log n"
    w(f"{'n':>10} {'M/log n':>16} {m0_label:>16} {'L log^2 n/n':>12} {'P(M0>M)':>8}\n")
    for a in aggs:
        m = a["M_over_log_n"]
        m0 = a["M0_ratio"]
        w(f"{a['n']:>10} {m['mean']:>8.4f}+-{m['se']:<6.4f} {m0['mean']:>8.4f}+-{m0['se']:<6.4f}"
          f" {a['L_ratio']:>12.4f} {a['strict_M0_gt_M']:>8.3f}\n")
    w(f"target M/log n -> beta_d = {tg['beta_d']:.4f}")
    if d == 2:
        w(f"; accept band {tg['M_over_log_n_band']}; L ratio limit band "
          f"[{L_BAND_LIMIT[0]:.2f}, {L_BAND_LIMIT[1]:.2f}], accept band {list(L_BAND)}")
    w("\n\n")
    w(f"{'n':>10}" + "".join(f" {'logTheta/logn d=' + repr(dl):>24}" for dl in deltas) + "\n")
    for a in aggs:
        w(f"{a['n']:>10}")
        for dl in deltas:
            r = a[f"log_theta_ratio_{dl!r}"]
            w(f" {r['mean']:>15.4f}+-{r['se']:<7.4f}")
        w("\n")
    w("targets 1 - delta: " + ", ".join(f"{k}: {v:.2f}" for k, v in tg["log_theta_ratio"].items())
      + "\n\n")
    w(f"{'n':>10} {'fit r':>8} " + " ".join(f"J{p + 1}/J{p}".rjust(8) for p in
                                              map(int, aggs[-1]["J_ratio"])) + "\n")
    for a in aggs:
        w(f"{a['n']:>10} {_f(a['J_ratio_fit'])} "
          + " ".join(_f(v) for v in a["J_ratio"].values()) + "\n")
    w(f"target geometric ratio c_tilde = {tg['c_tilde']:.4f}\n\n")
    w("pass flags\n")
    for k, v in summary["pass_flags"].items():
        w(f"  {'PASS' if v else 'FAIL'}  {k}\n")
    return buf.getvalue()


def _write_csv(path, header, rows, comment=None):
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([fmt(v) for v in r])


def _aggregate_table(aggs, columns, deltas):
    stats = columns[2:]
    header = ["n", "trials"]
    for c in stats:
        header += [f"{c}_mean", f"{c}_se", f"{c}_min", f"{c}_max"]
    header += ["M_over_log_n_mean", "M_over_log_n_se", "M0_ratio_mean", "M0_ratio_se",
               "strict_M0_gt_M"]
    for dl in deltas:
        header += [f"log_theta_ratio_{dl!r}_mean", f"log_theta_ratio_{dl!r}_se"]
    jkeys = list(aggs[0]["J_ratio"])
    header += ["L_ratio"] + [f"J_ratio_{p}" for p in jkeys] + ["J_ratio_fit"]
    rows = []
    for a in aggs:
        r = [a["n"], a["trials"]]
        for c in stats:
            r += [a[c]["mean"], a[c]["se"], a[c]["min"], a[c]["max"]]
        r += [a["M_over_log_n"]["mean"], a["M_over_log_n"]["se"], a["M0_ratio"]["mean"],
              a["M0_ratio"]["se"], a["strict_M0_gt_M"]]
        for dl in deltas:
            v = a[f"log_theta_ratio_{dl!r}"]
            r += [v["mean"], v["se"]]
        r += [a["L_ratio"]] + [a["J_ratio"][p] for p in jkeys] + [a["J_ratio_fit"]]
        rows.append(r)
    return header, rows


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_json_safe(v) for v in x]
    return x


def run_experiment(cfg, threads=None, beta=None):
    """Run every trial and write raw.csv, aggregate.csv, summary.json and report.txt.

    Returns the summary dict.  ``beta`` overrides the configured source.
    """
    cfg.validate()
    threads = cfg.threads if threads is None else threads
    beta = resolve_beta(cfg, threads) if beta is None else beta
    os.makedirs(cfg.output_dir, exist_ok=True)
    columns = raw_columns(cfg)
    raw = simulate(cfg, beta, threads)
    _write_csv(os.path.join(cfg.output_dir, "raw.csv"), columns, raw.tolist())
    aggs = aggregate(raw, columns, cfg, beta)
    header, rows = _aggregate_table(aggs, columns, cfg.deltas)
    _write_csv(os.path.join(cfg.output_dir, "aggregate.csv"), header, rows,
               comment=RATIO_CONVENTION)
    summary = {
        "config_echo": cfg.echo(),
        "beta_constant": beta.to_dict(),
        "targets": targets(cfg.d, beta, cfg.deltas),
        "per_checkpoint": aggs,
        "pass_flags": pass_flags(aggs, cfg.d, beta, cfg.deltas) if len(aggs) >= 3 else {},
    }
    summary = _json_safe(summary)
    with open(os.path.join(cfg.output_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=False)
        fh.write("\n")
    if len(aggs) >= 3:
        with open(os.path.join(cfg.output_dir, "report.txt"), "w") as fh:
            fh.write(convergence_report(summary))
    return summary


def load_summary(out_dir):
    with open(os.path.join(out_dir, "summary.json")) as fh:
        return json.load(fh)
