"""Matplotlib figures rendered next to the delimited outputs of train/ablate."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def save_training_curves(report, path) -> None:
    """Two panels per run: train loss and test accuracy over epochs, one line per seed."""
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(9, 3.2), dpi=120)
    for seed in sorted(report.curves):
        stats = report.curves[seed]
        epochs = [s.epoch for s in stats]
        ax_loss.plot(epochs, [s.train_loss for s in stats], label=f"seed {seed}")
        ax_acc.plot(epochs, [s.test_accuracy for s in stats], label=f"seed {seed}")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("train loss")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("test accuracy")
    ax_acc.set_ylim(0.0, 1.02)
    ax_acc.legend(fontsize=8)
    ax_loss.set_title(f"mean acc {report.mean:.3f} +- {report.std:.3f}")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_ablation_figure(rows, path) -> None:
    """Mean accuracy per grid cell, one line per scheme.

    `rows` are dicts with keys: grid, cell, scheme, mean_accuracy.
    """
    fig, ax = plt.subplots(figsize=(6, 3.6), dpi=120)
    schemes = sorted({r["scheme"] for r in rows})
    cells = list(dict.fromkeys(r["cell"] for r in rows))  # keep grid order
    positions = {c: i for i, c in enumerate(cells)}
    for scheme in schemes:
        pts = [(positions[r["cell"]], r["mean_accuracy"]) for r in rows if r["scheme"] == scheme]
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=scheme)
    ax.set_xticks(range(len(cells)))
    ax.set_xticklabels([str(c) for c in cells], rotation=30, ha="right", fontsize=8)
    ax.set_xlabel(rows[0]["grid"] if rows else "cell")
    ax.set_ylabel("mean test accuracy")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
