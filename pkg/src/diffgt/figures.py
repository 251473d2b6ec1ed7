"""Matplotlib rendering of diagnostic figures, written as deterministic SVG.

The date metadata is stripped and element-id hashing is salted with a
fixed string so re-running a command rewrites byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

matplotlib.rcParams["svg.hashsalt"] = "diffgt"

_SAVE_KWARGS = {"format": "svg", "metadata": {"Date": None}}


def save_snr_figure(curves, path) -> None:
    """One SNR-vs-step line per noise mode."""
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    for curve in curves:
        ax.plot(curve.steps, curve.snr, marker="o", markersize=3, label=curve.noise_mode)
    ax.set_xlabel("diffusion step")
    ax.set_ylabel("SNR (Fisher ratio)")
    ax.set_yscale("log")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def save_svd_figure(proj, labels, ratio, path) -> None:
    """2-D scatter of the top-2 projection, colored by class label."""
    proj = np.asarray(proj)
    labels = np.asarray(labels)
    fig, ax = plt.subplots(figsize=(4.8, 4.2))
    for lab in np.unique(labels):
        rows = labels == lab
        ax.scatter(proj[rows, 0], proj[rows, 1], s=8, alpha=0.7, label=str(lab))
    ax.set_xlabel("first singular direction")
    ax.set_ylabel("second singular direction")
    ax.set_title(f"anisotropy ratio = {ratio:.3g}")
    if len(np.unique(labels)) <= 12:
        ax.legend(fontsize=7, markerscale=1.5)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def save_training_figure(log_rows, path) -> None:
    """Loss-term curves over epochs from the training log."""
    rows = np.array([(r[0], r[1], r[2], r[3], r[4], r[5]) for r in log_rows], dtype=np.float64)
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    labels = ["bpr", "diff", "cl", "total", "val"]
    for col, label in enumerate(labels, start=1):
        series = rows[:, col]
        if np.all(np.isfinite(series)):
            ax.plot(rows[:, 0], series, label=label)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def save_metrics_figure(report, path) -> None:
    """Per-test-set recall/ndcg bars with the mean drawn as a line."""
    idx = np.arange(len(report.recall_per_set))
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    ax.bar(idx - 0.2, report.recall_per_set, width=0.4, label=f"recall@{report.k}")
    ax.bar(idx + 0.2, report.ndcg_per_set, width=0.4, label=f"ndcg@{report.k}")
    ax.axhline(report.recall_mean, color="C0", linestyle="--", linewidth=1)
    ax.axhline(report.ndcg_mean, color="C1", linestyle="--", linewidth=1)
    ax.set_xlabel("test set")
    ax.set_ylabel("metric value")
    ax.set_xticks(idx)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def save_timing_figure(reports, path) -> None:
    """Grouped bars of forward/reverse wall time per variant."""
    names = [r.variant for r in reports]
    fwd = [r.forward_seconds for r in reports]
    rev = [r.reverse_seconds for r in reports]
    x = np.arange(len(names))
    fig, ax = plt.subplots(figsize=(6.2, 3.8))
    ax.bar(x - 0.2, fwd, width=0.4, label="forward")
    ax.bar(x + 0.2, rev, width=0.4, label="reverse")
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("wall time (s)")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)
