"""Report figures, rendered to files with the Agg backend."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .calibration import gaussian_fit  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}
COLORS = {"correct": "#2b83ba", "incorrect": "#d7191c", "tau": "#404040"}


def figsize(scale=1.0, ratio=None):
    width = 6.4 * scale
    ratio = ratio or (math.sqrt(5.0) - 1.0) / 2.0
    return width, width * ratio


def save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # no Software/date metadata so reruns are byte-stable
    fig.savefig(path, metadata={"Software": None}, bbox_inches="tight")
    plt.close(fig)
    return path


def _gauss_pdf(x, mu, sigma):
    if sigma <= 0:
        return np.zeros_like(x)
    return np.exp(-0.5 * ((x - mu) / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))


def _dist_panel(ax, correct, incorrect, tau, title):
    allv = list(correct) + list(incorrect)
    hi = max(allv) if allv else 1.0
    bins = np.linspace(0.0, hi * 1.05 or 1.0, 30)
    grid = np.linspace(0.0, bins[-1], 200)
    for name, vals in (("correct", correct), ("incorrect", incorrect)):
        if not vals:
            continue
        ax.hist(vals, bins=bins, density=True, alpha=0.45, color=COLORS[name], label=f"{name} (n={len(vals)})")
        fit = gaussian_fit(vals)
        ax.plot(grid, _gauss_pdf(grid, fit.mu, fit.sigma), color=COLORS[name], lw=1.2)
    if tau is not None and math.isfinite(tau):
        ax.axvline(tau, color=COLORS["tau"], ls="--", lw=1.0, label=f"threshold {tau:.3f}")
    ax.set_title(title)
    ax.set_xlabel("uncertainty")
    ax.set_ylabel("density")
    ax.legend(frameon=False)


def plot_uncertainty_distributions(small_split, large_split, tau1, tau2, path):
    """Histograms and Gaussian fits of correct/incorrect uncertainties, one panel per model."""
    with plt.rc_context(RC):
        fig, (a, b) = plt.subplots(1, 2, figsize=figsize(1.3, 0.42))
        _dist_panel(a, *small_split, tau1, "small model")
        _dist_panel(b, *large_split, tau2, "MLLM")
        return save(fig, path)


def plot_stage_breakdown(report, path):
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=figsize(0.9))
        names = list(report.per_stage_counts)
        counts = [report.per_stage_counts[k] for k in names]
        ax.bar(range(len(names)), counts, color="#5e3c99")
        ax.set_xticks(range(len(names)))
        ax.set_xticklabels(names, rotation=15)
        ax.set_ylabel("samples")
        ax.set_title(f"terminal stage (n={report.n}, MAE {report.mae:.3f})")
        return save(fig, path)


def plot_predictions(finals, truths, path):
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=figsize(0.7, 1.0))
        ax.scatter(truths, finals, s=6, alpha=0.5, color="#2b83ba")
        lo = min(min(truths), min(finals))
        hi = max(max(truths), max(finals))
        ax.plot([lo, hi], [lo, hi], color="#404040", lw=0.8)
        ax.set_xlabel("ground truth")
        ax.set_ylabel("final prediction")
        return save(fig, path)


def plot_ablation(rows, path):
    """MAE and escalation rate per ablation variant."""
    with plt.rc_context(RC):
        fig, (a, b) = plt.subplots(1, 2, figsize=figsize(1.3, 0.42))
        names = [r["variant"] for r in rows]
        x = np.arange(len(names))
        a.bar(x, [r["mae"] for r in rows], color="#2b83ba")
        a.set_ylabel("MAE")
        b.bar(x, [r["escalation_rate_stage2"] for r in rows], color="#fdae61")
        b.set_ylabel("escalation rate")
        for ax in (a, b):
            ax.set_xticks(x)
            ax.set_xticklabels(names, rotation=30, ha="right")
        return save(fig, path)


def plot_threshold_sweep(points, path):
    """``points``: sequence of (tau1, escalation_rate, mae)."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=figsize(0.9))
        esc = [p[1] for p in points]
        err = [p[2] for p in points]
        ax.plot(esc, err, marker="o", ms=3, color="#5e3c99")
        for tau, e, m in points:
            ax.annotate(f"{tau:.2f}", (e, m), fontsize=6, xytext=(2, 2), textcoords="offset points")
        ax.set_xlabel("escalation rate (cost)")
        ax.set_ylabel("MAE")
        return save(fig, path)
