"""Figures for the report path; everything renders to files with the Agg backend."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .analysis import MassCurve  # noqa: E402


def plot_mass_curves(curves: Mapping[str, MassCurve], path: str | Path, title: str = "") -> Path:
    """Cumulative top-N probability mass, one line per model, log-scaled N axis."""
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    for label, curve in curves.items():
        ns, mass = zip(*curve.points)
        ax.plot(ns, mass, marker="o", markersize=3, label=label)
    ax.set_xscale("log")
    ax.set_xlabel("N (top-N tokens)")
    ax.set_ylabel("mean cumulative probability")
    ax.set_ylim(0, 1.02)
    ax.grid(True, alpha=0.3)
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_scenario(report, path: str | Path) -> Path:
    """Bar panels for entropy, synthetic-corpus PPL and dev BLEU per scenario row."""
    rows = report.rows
    names = [r.name for r in rows]
    panels = [
        ("IBM-1 entropy (nats)", [r.entropy for r in rows]),
        ("PPL on synthetic corpus", [r.synthetic_ppl if r.synthetic_ppl is not None else float("nan") for r in rows]),
        ("dev BLEU", [r.dev_bleu for r in rows]),
    ]
    fig, axes = plt.subplots(1, len(panels), figsize=(4 * len(panels), 3.6))
    for ax, (label, values) in zip(axes, panels):
        ax.bar(range(len(names)), values, color="tab:blue")
        ax.set_xticks(range(len(names)))
        ax.set_xticklabels(names, rotation=40, ha="right", fontsize=8)
        ax.set_title(label, fontsize=10)
        ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
