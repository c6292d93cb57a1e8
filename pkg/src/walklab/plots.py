"""Convergence figures rendered from a stored summary (Agg backend, PNG files)."""
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _series(aggs, key, sub="mean"):
    return [a[key][sub] if isinstance(a[key], dict) else a[key] for a in aggs]


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def plot_M_ratio(summary, path):
    aggs = summary["per_checkpoint"]
    n = [a["n"] for a in aggs]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(n, _series(aggs, "M_over_log_n"), yerr=_series(aggs, "M_over_log_n", "se"),
                marker="o", ms=3, capsize=2, label="M(n) / log n")
    ax.axhline(summary["targets"]["beta_d"], color="k", ls="--", lw=1, label="beta_d")
    band = summary["targets"].get("M_over_log_n_band")
    if band:
        ax.axhspan(*band, color="0.9", zorder=0, label="accept band")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("n")
    ax.legend()
    return _save(fig, path)


def plot_theta(summary, path):
    aggs = summary["per_checkpoint"]
    n = [a["n"] for a in aggs]
    fig, ax = plt.subplots(figsize=(6, 4))
    for dl, target in summary["targets"]["log_theta_ratio"].items():
        key = f"log_theta_ratio_{dl}"
        line = ax.errorbar(n, _series(aggs, key), yerr=_series(aggs, key, "se"), marker="o",
                           ms=3, capsize=2, label=f"delta={dl}")
        ax.axhline(target, color=line[0].get_color(), ls="--", lw=1)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("n")
    ax.set_ylabel("log Theta_n(delta) / log n")
    ax.legend()
    return _save(fig, path)


def plot_L_ratio(summary, path):
    aggs = summary["per_checkpoint"]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot([a["n"] for a in aggs], [a["L_ratio"] for a in aggs], marker="o", ms=3,
            label="E L_n (log n)^2 / n")
    band = summary["targets"].get("L_ratio_band_limit")
    if band:
        ax.axhspan(*band, color="0.9", zorder=0, label="limit band")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("n")
    ax.legend()
    return _save(fig, path)


def plot_J(summary, path):
    last = summary["per_checkpoint"][-1]
    ps = sorted(int(k[2:]) for k in last if k.startswith("J_") and k[2:].isdigit())
    means = [last[f"J_{p}"]["mean"] for p in ps]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(ps, [max(m, 1e-3) for m in means], marker="o", label=f"E J(p), n={last['n']}")
    c = summary["targets"]["c_tilde"]
    if means and means[0] > 0:
        ax.semilogy(ps, [means[0] * c ** (p - ps[0]) for p in ps], "k--", lw=1,
                    label=f"geometric, ratio {c:.3f}")
    ax.set_xlabel("p")
    ax.legend()
    return _save(fig, path)


def render_all(summary, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    paths = [plot_M_ratio(summary, os.path.join(out_dir, "fig_M_ratio.png")),
             plot_theta(summary, os.path.join(out_dir, "fig_theta.png")),
             plot_J(summary, os.path.join(out_dir, "fig_J.png"))]
    if summary["config_echo"]["d"] == 2:
        paths.append(plot_L_ratio(summary, os.path.join(out_dir, "fig_L_ratio.png")))
    return paths
