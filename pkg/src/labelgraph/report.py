"""Figure and delimited-file rendering for training and evaluation reports.

Figures are written next to the delimited output they summarize: training
emits history.csv plus a learning-curve PNG, evaluation emits per_label.csv
plus a per-label metrics PNG.
"""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

HISTORY_FIELDS = ["epoch", "lr", "train_loss", "valid_loss", "valid_micro_f1",
                  "valid_macro_f1", "valid_micro_auc", "valid_macro_auc"]


def history_to_csv(history: list, path) -> None:
    with open(path, "w", encoding="utf8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=HISTORY_FIELDS, extrasaction="ignore")
        writer.writeheader()
        for entry in history:
            writer.writerow({k: ("" if entry.get(k) is None else entry.get(k))
                             for k in HISTORY_FIELDS})


def save_history_figure(history: list, path) -> None:
    """Loss curves with the learning-rate staircase on a twin axis."""
    epochs = [h["epoch"] for h in history]
    fig, (ax, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax.plot(epochs, [h["train_loss"] for h in history], label="train loss")
    ax.plot(epochs, [h["valid_loss"] for h in history], label="valid loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean binary cross-entropy")
    ax.legend()
    ax.grid(True, alpha=0.3)
    lr_ax = ax.twinx()
    lr_ax.plot(epochs, [h["lr"] for h in history], color="gray", linestyle=":",
               label="learning rate")
    lr_ax.set_ylabel("learning rate")
    lr_ax.set_yscale("log")

    f1s = [h.get("valid_micro_f1") for h in history]
    if any(v is not None for v in f1s):
        ax2.plot(epochs, f1s, label="valid micro F1")
        macro = [h.get("valid_macro_f1") for h in history]
        ax2.plot(epochs, macro, label="valid macro F1")
        aucs = [h.get("valid_micro_auc") for h in history]
        if any(v is not None for v in aucs):
            ax2.plot(epochs, aucs, label="valid micro AUC", linestyle="--")
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("metric")
    ax2.set_ylim(0, 1.05)
    ax2.legend()
    ax2.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def per_label_to_csv(rows: list, path) -> None:
    with open(path, "w", encoding="utf8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=["label", "f1", "auc", "positives"])
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if row[k] is None else row[k]) for k in row})


def save_metrics_figure(report: dict, per_label: list, path) -> None:
    """Summary bars for the four headline metrics plus a per-label F1 panel."""
    fig, (ax, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    names = ["m_f1", "M_f1", "m_auc", "M_auc"]
    values = [report.get(n) or 0.0 for n in names]
    ax.bar(range(len(names)), values, color="steelblue")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(["micro F1", "macro F1", "micro AUC", "macro AUC"])
    ax.set_ylim(0, 1.05)
    ax.set_title(f"threshold {report.get('threshold')}")
    for k, v in enumerate(values):
        ax.text(k, v + 0.02, f"{v:.3f}", ha="center", fontsize=8)

    labels = [row["label"] for row in per_label]
    ax2.bar(labels, [row["f1"] for row in per_label], color="coral")
    ax2.set_xlabel("label")
    ax2.set_ylabel("F1")
    ax2.set_ylim(0, 1.05)
    ax2.set_title("per-label F1")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
