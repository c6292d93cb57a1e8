"""Acceptance criteria, each run at its stated tolerance.

Every test records one PASS/FAIL line (echoed in the terminal summary) and
then asserts, so a failing criterion stays red.
"""
import filecmp
import math
import time
from fractions import Fraction

import numpy as np
import pytest

import conftest
from oracles import return_tail_2d
from walklab.audit import audit_sweep, enumeration_audit
from walklab.cli import main
from walklab.experiment import ExperimentConfig, run_experiment
from walklab.fastrange import batch_statistics
from walklab.hitting.bracket import exact_bracket_2d, extrapolated_estimate
from walklab.hitting.estimate import (CutoffPolicy, Target, estimate_return_before_neighbor,
                                      estimate_tail, estimate_truncated, tail_identity_table)
from walklab.oracle import enumerate as oracle_enumerate, enumerate_all, enumerate_hitting
from walklab.rng import RngStream
from walklab.statistics import beta_from_p

pytestmark = pytest.mark.slow

SEED = 20240611


def verdict(k, ok, detail):
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
    conftest.VERDICTS.append(line)
    print(line)
    return ok


@pytest.fixture(scope="session")
def bracket320():
    t = time.perf_counter()
    br = exact_bracket_2d(None, 320)
    return br, time.perf_counter() - t


@pytest.fixture(scope="session")
def run_d2(tmp_path_factory):
    out = tmp_path_factory.mktemp("d2")
    cfg = ExperimentConfig(d=2, horizon=2 ** 20, trials=100, master_seed=SEED,
                           output_dir=str(out))
    t = time.perf_counter()
    summary = run_experiment(cfg)
    return summary, time.perf_counter() - t


@pytest.fixture(scope="session")
def run_d3(tmp_path_factory):
    out = tmp_path_factory.mktemp("d3")
    cfg = ExperimentConfig(d=3, horizon=2 ** 20, trials=100, master_seed=SEED,
                           beta_source={"kind": "exact-bracket", "box_radius": 40},
                           output_dir=str(out))
    t = time.perf_counter()
    summary = run_experiment(cfg)
    return summary, time.perf_counter() - t


def test_criterion_01_exact_constant(bracket320):
    br, t_br = bracket320
    t = time.perf_counter()
    est = estimate_return_before_neighbor(2, None, CutoffPolicy.radius(10 ** 4), 10 ** 6,
                                          RngStream(SEED, 1))
    elapsed = t_br + time.perf_counter() - t
    ok_br = br.contains(0.5) and br.width <= 0.05
    ok_mc = 0.495 <= est.probability <= 0.505
    ok = verdict(1, ok_br and ok_mc and elapsed <= 300,
                 f"bracket L=320 [{br.lower:.5f}, {br.upper:.5f}] width {br.width:.5f}; "
                 f"MC {est.probability:.5f} +- {est.half_width:.5f}; {elapsed:.0f}s")
    assert ok


def test_criterion_02_beta2(bracket320):
    br, _ = bracket320
    b = beta_from_p(br.midpoint)
    ok = verdict(2, abs(b - 1 / math.log(2)) <= 0.02,
                 f"beta from midpoint {br.midpoint:.6f} = {b:.5f} (target 1.44270)")
    assert ok


def test_criterion_03_trend_d2(run_d2):
    summary, elapsed = run_d2
    aggs = summary["per_checkpoint"]
    tail = aggs[-5:]
    steps = [(b["M_over_log_n"]["mean"] - a["M_over_log_n"]["mean"], b["M_over_log_n"]["diff_se"])
             for a, b in zip(tail, tail[1:])]
    trend = all(dm >= -se for dm, se in steps)
    final = aggs[-1]["M_over_log_n"]["mean"]
    band = 0.7 <= final <= 1.6
    ok = verdict(3, trend and band and elapsed <= 1800,
                 f"M/log n over last 5 checkpoints "
                 f"{[round(a['M_over_log_n']['mean'], 4) for a in tail]}, "
                 f"final {final:.4f} in [0.7, 1.6]: {band}; {elapsed:.0f}s")
    assert ok


def test_criterion_04_trend_d3(run_d3):
    summary, _ = run_d3
    p3, _ = extrapolated_estimate(3, None, (20, 40))
    target = beta_from_p(p3)
    final = summary["per_checkpoint"][-1]["M_over_log_n"]["mean"]
    ok = verdict(4, abs(final - target) <= 0.35,
                 f"final M/log n {final:.4f} vs 1/(-log {p3:.5f}) = {target:.4f} (+-0.35)")
    assert ok


def test_criterion_05_theta(run_d2):
    summary, _ = run_d2
    aggs = summary["per_checkpoint"]
    v = aggs[-1]["log_theta_ratio_0.5"]["mean"]
    deltas = (0.25, 0.5, 0.75)
    mono = all(a[f"log_theta_ratio_{x}"]["mean"] > a[f"log_theta_ratio_{y}"]["mean"]
               for a in aggs for x, y in zip(deltas, deltas[1:]))
    last = [round(aggs[-1][f"log_theta_ratio_{x}"]["mean"], 4) for x in deltas]
    ok = verdict(5, 0.3 <= v <= 0.7 and mono,
                 f"log Theta(0.5)/log n = {v:.4f} in [0.3, 0.7]; per-delta at 2^20 {last}; "
                 f"decreasing at every checkpoint: {mono}")
    assert ok


def test_criterion_06_L_band(run_d2):
    summary, _ = run_d2
    vals = {a["n"]: a["L_ratio"] for a in summary["per_checkpoint"]
            if a["n"] in (2 ** 18, 2 ** 19, 2 ** 20)}
    ok = verdict(6, len(vals) == 3 and all(3 <= v <= 25 for v in vals.values()),
                 "E L_n (log n)^2/n: " + ", ".join(f"2^{int(math.log2(n))}: {v:.3f}"
                                                   for n, v in vals.items()))
    assert ok


def test_criterion_07_J_ratio(run_d2):
    summary, _ = run_d2
    last = summary["per_checkpoint"][-1]
    r = last["J_ratio_fit"]
    ok = verdict(7, abs(r - 0.5) <= 0.1,
                 f"fitted J(p+1)/J(p) over p=1..4 at 2^20: {r:.4f} (target 0.5 +- 0.1)")
    assert ok


def test_criterion_08_favorite_site(run_d2, run_d3):
    all_rows = all(a["M_le_M0"] for s, _ in (run_d2, run_d3) for a in s["per_checkpoint"])
    frac = run_d2[0]["per_checkpoint"][-1]["strict_M0_gt_M"]
    ok = verdict(8, all_rows and frac >= 0.5,
                 f"M <= M0 on every row: {all_rows}; fraction M0 > M at 2^20 (d=2): {frac:.2f}")
    assert ok


def test_criterion_09_tail_asymptotic():
    est = estimate_tail(2, Target.RETURN_TAIL, 10 ** 4, 10 ** 6, RngStream(SEED, 9))
    target = math.pi / math.log(10 ** 4)
    exact = return_tail_2d(10 ** 4)
    ok = verdict(9, abs(est.probability - target) <= 0.02,
                 f"P(T0 > 10^4) = {est.probability:.5f} +- {est.half_width:.5f} vs "
                 f"pi/log(10^4) = {target:.5f} (+-0.02); renewal-exact value {exact:.5f}")
    assert ok


def test_criterion_10_tail_identity():
    grid = [2 ** j for j in range(11)]
    lines = []
    ok = True
    for d in (2, 3):
        rows = tail_identity_table(d, None, grid, 10 ** 6, RngStream(SEED, 10 + d))
        ok &= all(r["ok"] for r in rows)
        worst = max(rows, key=lambda r: abs(r["diff"]) / max(r["band"], 1e-300))
        lines.append(f"d={d} worst a={worst['a']} |diff| {abs(worst['diff']):.5f} "
                     f"band {worst['band']:.5f}")
    ok = verdict(10, ok, "; ".join(lines))
    assert ok


def _mc_vs_exact(samples, exact):
    x = np.asarray(samples, dtype=float)
    se = x.std(ddof=1) / math.sqrt(x.size)
    diff = abs(x.mean() - float(exact))
    return (diff <= 4 * se) if se > 0 else diff == 0, diff, se


def test_criterion_11_oracle_equivalence():
    exact_ok = (oracle_enumerate(2, 2, "M").expectation == Fraction(5, 4)
                and oracle_enumerate(2, 2, "L").expectation == Fraction(11, 4)
                and enumerate_hitting(2, "T0<Tb^k", 2, {"k": 3}).expectation == Fraction(3, 16)
                and enumerate_hitting(2, "T0>m", 2, {"m": 2}).expectation
                == enumerate_hitting(2, "Tb>m", 2, {"m": 1}).expectation == Fraction(3, 4))
    trials = 10 ** 5
    beta = 1 / math.log(2)
    deltas = (0.25, 0.5, 0.75)
    ps = (1, 2, 3)
    cps = list(range(2, 11))
    data = batch_statistics(RngStream(SEED, 11), 2, cps, beta, trials, deltas, ps)
    names = ["M", "M0", "L", "range_size"] + [f"J_{p}" for p in ps]
    bad = []
    checked = 0
    for ci, n in enumerate(cps):
        thetas = [{"beta": beta, "delta": dl} for dl in deltas]
        ex = enumerate_all(2, n, ps=ps, thetas=thetas)
        keys = names + [f"Theta_beta={beta}_delta={dl}" for dl in deltas]
        for col, key in enumerate(keys):
            good, diff, se = _mc_vs_exact(data[:, ci, col], ex[key].expectation)
            checked += 1
            if not good:
                bad.append((n, key, diff, se))
    for k in range(3, 12):
        est = estimate_truncated(2, None, k, trials, RngStream(SEED, 100 + k))
        p = enumerate_hitting(2, "T0<Tb^k", k - 1, {"k": k}).expectation
        checked += 1
        if abs(est.probability - float(p)) > 4 * math.sqrt(float(p) * (1 - float(p)) / trials):
            bad.append(("trunc", k, est.probability, float(p)))
    for target, event in ((Target.RETURN_TAIL, "T0>m"), (Target.NEIGHBOR_TAIL, "Tb>m"),
                          (Target.JOINT_TAIL, "T0^Tb>m")):
        for m in range(1, 11):
            est = estimate_tail(2, target, m, trials, RngStream(SEED, 200 + m))
            p = float(enumerate_hitting(2, event, m, {"m": m}).expectation)
            checked += 1
            if abs(est.probability - p) > 4 * math.sqrt(p * (1 - p) / trials):
                bad.append((event, m, est.probability, p))
    ok = verdict(11, exact_ok and not bad,
                 f"exact values reproduced: {exact_ok}; {checked - len(bad)}/{checked} "
                 f"Monte Carlo means within 4 SE of the enumeration"
                 + (f"; outliers {bad[:3]}" if bad else ""))
    assert ok


def test_criterion_12_tracker_audit():
    reps = [audit_sweep(d, 1000, 1000, SEED) for d in (2, 3)]
    enumerated = sum(enumeration_audit(2, n) for n in range(0, 9))
    ok = all(r.ok for r in reps)
    ok = verdict(12, ok,
                 "; ".join(f"d={d}: {r.paths} paths, {len(r.mismatches)} mismatches, "
                           f"{r.nesting_checked} nesting checks, {len(r.nesting_failures)} failures"
                           for d, r in zip((2, 3), reps))
                 + f"; {enumerated} enumerated paths (n <= 8) agree")
    assert ok


def test_criterion_13_determinism(tmp_path):
    import json

    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"d": 2, "horizon": 2 ** 16, "trials": 16, "master_seed": SEED}))
    outs = []
    for th in (1, 4, 8):
        out = tmp_path / f"t{th}"
        assert main(["simulate", "--config", str(cfg), "--threads", str(th), "--out", str(out),
                     "--json"]) == 0
        outs.append(out)
    files = ("raw.csv", "aggregate.csv", "summary.json", "report.txt")
    same = all(filecmp.cmp(outs[0] / f, o / f, shallow=False) for o in outs[1:] for f in files)
    ok = verdict(13, same, f"outputs byte-identical across threads 1, 4, 8: {same}")
    assert ok
