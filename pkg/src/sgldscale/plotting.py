"""Figures written next to the CSV outputs. CSVs are the contract; these are previews."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Software": None}


def plot_rate_study(study, path):
    h = np.array([p.h for p in study.points])
    gap = np.array([p.gap for p in study.points])
    se = np.array([p.stderr for p in study.points])
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.errorbar(h, gap, yerr=2 * se, fmt="o", capsize=3, label=f"{study.functional} gap (2 SE)")
    if np.isfinite(study.slope):
        ax.plot(h, np.exp(study.intercept) * h**study.slope, "--",
                label=f"OLS slope {study.slope:.3f} ± {study.slope_se:.3f}")
    ref = gap[0] * np.sqrt(h * np.log(1 / h) / (h[0] * np.log(1 / h[0])))
    ax.plot(h, ref, ":", color="gray", label="sqrt(h log(1/h)) reference")
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("step size h")
    ax.set_ylabel("normalized functional gap")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)


def plot_paths(ens, path, max_paths: int = 20):
    t = np.arange(ens.alpha + 1) / ens.alpha
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for row in ens.values[:max_paths]:
        ax.step(t, row, where="post", lw=0.8, alpha=0.7)
    ax.set_xlabel("t")
    ax.set_ylabel(ens.label)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)


def plot_implied_cp(rows, path):
    """rows: dicts with keys a, A, p, implied_cp."""
    fig, ax = plt.subplots(figsize=(5, 4))
    for p in sorted({r["p"] for r in rows}):
        for A in sorted({r["A"] for r in rows}):
            sel = sorted((r for r in rows if r["p"] == p and r["A"] == A), key=lambda r: r["a"])
            ax.plot([r["a"] for r in sel], [r["implied_cp"] for r in sel], "o-", label=f"p={p:g}, A={A:g}")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("mean reversion a")
    ax.set_ylabel("implied C_p")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)


def plot_variance(points, path):
    h = np.array([p.h for p in points])
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.errorbar(h, [p.var_gap for p in points], yerr=[2 * p.var_y_stderr for p in points], fmt="o-", capsize=3)
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("step size h")
    ax.set_ylabel("|Var(Ybar) - Var(Zbar)|")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)
