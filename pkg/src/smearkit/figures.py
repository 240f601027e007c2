"""Report figures rendered to deterministic standalone SVG bytes.

Determinism requirements: the Agg backend (no display), a fixed
``svg.hashsalt`` so internal element ids do not vary per process, and a
suppressed creation date in the SVG metadata. With those pinned, identical
inputs produce byte-identical files, which makes the figures diff-able.
"""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "smearkit"

import matplotlib.pyplot as plt
import numpy as np

from .metrics import ConfusionMatrix


def render_svg(fig) -> bytes:
    """Serialize a figure as SVG bytes with no embedded timestamp."""
    buf = io.BytesIO()
    try:
        fig.savefig(buf, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
    return buf.getvalue()


def confusion_matrix_svg(cm: ConfusionMatrix) -> bytes:
    """Heatmap of the confusion counts, predicted rows by actual columns."""
    m = cm.num_classes
    side = max(4.0, 1.0 + 0.9 * m)
    fig, ax = plt.subplots(figsize=(side, side * 0.85))
    image = ax.imshow(cm.counts, cmap="Blues")
    fig.colorbar(image, ax=ax, fraction=0.046, pad=0.04)
    ax.set_xticks(range(m), cm.class_names, rotation=45, ha="right")
    ax.set_yticks(range(m), cm.class_names)
    ax.set_xlabel("actual class")
    ax.set_ylabel("predicted class")
    ax.set_title("Confusion matrix")
    threshold = cm.counts.max() / 2 if cm.counts.max() > 0 else 0
    for i in range(m):
        for j in range(m):
            count = int(cm.counts[i, j])
            color = "white" if count > threshold else "black"
            ax.text(j, i, str(count), ha="center", va="center", color=color)
    fig.tight_layout()
    return render_svg(fig)


def training_curves_svg(history) -> bytes:
    """Loss and accuracy per epoch for the train and validation sets."""
    records = list(history)
    epochs = [r.epoch for r in records]
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(10, 4))
    ax_loss.plot(epochs, [r.train_loss for r in records], label="train")
    ax_loss.plot(epochs, [r.val_loss for r in records], label="validation")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("loss")
    ax_loss.set_title("Loss")
    ax_loss.legend()
    ax_loss.grid(True, alpha=0.3)
    ax_acc.plot(epochs, [r.train_acc for r in records], label="train")
    ax_acc.plot(epochs, [r.val_acc for r in records], label="validation")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("accuracy")
    ax_acc.set_ylim(0.0, 1.05)
    ax_acc.set_title("Accuracy")
    ax_acc.legend()
    ax_acc.grid(True, alpha=0.3)
    fig.tight_layout()
    return render_svg(fig)


def scores_heatmap_svg(class_names, sample_ids, scores) -> bytes:
    """Per-sample normalized ensemble scores as a wide heatmap."""
    scores = np.asarray(scores, dtype=np.float64)
    n = min(len(sample_ids), 40)  # cap rows so the figure stays readable
    fig, ax = plt.subplots(figsize=(2 + 0.8 * len(class_names), 1 + 0.25 * n))
    image = ax.imshow(scores[:n], cmap="Blues", aspect="auto", vmin=0.0, vmax=1.0)
    fig.colorbar(image, ax=ax, fraction=0.046, pad=0.04)
    ax.set_xticks(range(len(class_names)), class_names, rotation=45, ha="right")
    ax.set_yticks(range(n), sample_ids[:n])
    ax.set_xlabel("class")
    ax.set_title("Ensemble scores" + (f" (first {n} samples)" if n < len(sample_ids) else ""))
    fig.tight_layout()
    return render_svg(fig)
