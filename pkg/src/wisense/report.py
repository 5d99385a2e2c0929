"""SVG line plots of metric and loss CSVs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .io import read_csv  # noqa: E402

# fixed ids and no timestamp -> byte-identical SVGs for identical inputs
matplotlib.rcParams["svg.hashsalt"] = "wisense"
_META = {"Date": None, "Creator": "wisense"}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)


def plot_errors(metric_csvs: dict, path) -> Path:
    """Per-timestamp localisation and pose error, one line per run."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    for label, csv_path in metric_csvs.items():
        _, rows = read_csv(csv_path)
        idx = [int(r[0]) for r in rows]
        axes[0].plot(idx, [float(r[1]) for r in rows], marker="o", ms=3, label=label)
        axes[1].plot(idx, [float(r[2]) for r in rows], marker="o", ms=3, label=label)
    axes[0].set_ylabel("mean localisation error (m)")
    axes[1].set_ylabel("mean keypoint error (m)")
    for ax in axes:
        ax.set_xlabel("timestamp index in block")
        ax.grid(alpha=0.3)
        ax.legend(fontsize=8)
    _save(fig, path)
    return Path(path)


def plot_losses(history_csvs: dict, path) -> Path:
    """Validation (solid) and training (dashed) loss per epoch, per stage."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for label, csv_path in history_csvs.items():
        _, rows = read_csv(csv_path)
        stages = sorted({r[0] for r in rows})
        for st in stages:
            sub = [r for r in rows if r[0] == st]
            ep = [int(r[1]) for r in sub]
            name = f"{label}:{st}" if len(history_csvs) > 1 or len(stages) > 1 else label
            line, = ax.plot(ep, [float(r[4]) for r in sub], label=f"{name} val")
            ax.plot(ep, [float(r[3]) for r in sub], ls="--", color=line.get_color(), alpha=0.6)
    ax.set_xlabel("epoch")
    ax.set_ylabel("total loss")
    ax.set_yscale("log")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    _save(fig, path)
    return Path(path)
