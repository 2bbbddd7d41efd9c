"""Figure rendering for the experiment commands.

Each report command writes its delimited output first (the normative
artifact) and then renders a companion PNG next to it with these helpers.
Figures use the Agg backend so runs work headless; their bytes are not
covered by the determinism guarantee, the CSV files are.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def render_curves_png(curve, path: str | Path) -> Path:
    """Training and validation loss/accuracy over epochs."""
    epochs = [r.epoch for r in curve]
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax_loss.plot(epochs, [r.train_loss for r in curve], label="train")
    ax_loss.plot(epochs, [r.val_loss for r in curve], label="validation")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("loss")
    ax_loss.legend()
    ax_acc.plot(epochs, [r.train_acc for r in curve], label="train")
    ax_acc.plot(epochs, [r.val_acc for r in curve], label="validation")
    ax_acc.axhline(0.5, color="gray", linewidth=0.8, linestyle=":")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("accuracy")
    ax_acc.set_ylim(0.0, 1.05)
    ax_acc.legend()
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=110)
    plt.close(fig)
    return out


def render_phase_png(rows, path: str | Path) -> Path:
    """Empirical SAT fraction against the clause-to-atom ratio."""
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ax.plot([r["ratio"] for r in rows], [r["sat_fraction"] for r in rows], marker="o")
    ax.axhline(0.5, color="gray", linewidth=0.8, linestyle=":")
    ax.set_xlabel("clause-to-atom ratio")
    ax.set_ylabel("SAT fraction")
    ax.set_ylim(-0.02, 1.02)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=110)
    plt.close(fig)
    return out


def render_anneal_png(rows, path: str | Path) -> Path:
    """Miss rate of the annealed relaxation solver against instance size."""
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ax.plot([r["n"] for r in rows], [r["miss_rate"] for r in rows], marker="o")
    ax.set_xlabel("variables")
    ax.set_ylabel("miss rate")
    ax.set_ylim(-0.02, 1.02)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=110)
    plt.close(fig)
    return out
