"""File-based report rendering: delimited tables plus matplotlib figures.

Everything here writes to paths the CLI chooses; nothing prints. Figures use
the Agg backend so rendering works without a display.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def write_history_tsv(history, path):
    with open(path, "w", encoding="utf-8") as sink:
        sink.write("epoch\ttrain_loss\tvalid_f1\n")
        for row in history:
            loss = "" if row.train_loss is None else f"{row.train_loss:.6f}"
            sink.write(f"{row.epoch}\t{loss}\t{row.valid_f1:.2f}\n")


def write_report_tsv(report, path):
    from .metrics import format_report_kv

    with open(path, "w", encoding="utf-8") as sink:
        for line in format_report_kv(report).strip().splitlines():
            key, _, value = line.partition("=")
            sink.write(f"{key}\t{value}\n")


def write_confusion_tsv(cm, path):
    with open(path, "w", encoding="utf-8") as sink:
        sink.write("gold\tTotal\t" + "\t".join(cm.tags) + "\tPercent\n")
        for i, tag in enumerate(cm.tags):
            counts = "\t".join(str(int(c)) for c in cm.counts[i])
            sink.write(f"{tag}\t{cm.row_total(i)}\t{counts}\t{cm.row_percent(i):.3f}\n")


def save_training_curves(history, path):
    """Loss and validation F1 per epoch, one panel each."""
    epochs = [row.epoch for row in history]
    f1s = [row.valid_f1 for row in history]
    loss_pts = [(row.epoch, row.train_loss) for row in history if row.train_loss is not None]
    fig, (ax_loss, ax_f1) = plt.subplots(1, 2, figsize=(9, 3.5))
    if loss_pts:
        ax_loss.plot([e for e, _ in loss_pts], [l for _, l in loss_pts], marker="o", ms=3)
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("mean train loss")
    ax_loss.set_title("Training loss")
    ax_f1.plot(epochs, f1s, marker="o", ms=3, color="tab:green")
    ax_f1.set_xlabel("epoch")
    ax_f1.set_ylabel("valid F1 (%)")
    ax_f1.set_ylim(-2, 102)
    ax_f1.set_title("Validation F1")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_confusion_heatmap(cm, path):
    """Row-normalized heatmap of the confusion counts with annotations."""
    counts = cm.counts.astype(float)
    totals = counts.sum(axis=1, keepdims=True)
    shade = np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)
    n = len(cm.tags)
    fig, ax = plt.subplots(figsize=(1.1 * n + 2, 1.0 * n + 1.5))
    im = ax.imshow(shade, cmap="Blues", vmin=0.0, vmax=1.0)
    ax.set_xticks(range(n), cm.tags, rotation=45, ha="right")
    ax.set_yticks(range(n), cm.tags)
    ax.set_xlabel("predicted")
    ax.set_ylabel("gold")
    for i in range(n):
        for j in range(n):
            color = "white" if shade[i, j] > 0.5 else "black"
            ax.text(j, i, str(int(cm.counts[i, j])), ha="center", va="center", color=color)
    fig.colorbar(im, ax=ax, label="share of gold row")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
