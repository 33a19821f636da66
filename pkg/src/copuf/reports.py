"""
Report sinks: append-only JSON-lines records keyed by experiment UUID,
delimited (CSV) exports of curves and sweep results, and matplotlib
figures rendered to files next to them.
"""
from __future__ import annotations

import csv
import json
import time
import uuid
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def new_record(kind: str, payload: dict) -> dict:
    return {
        "uuid": str(uuid.uuid4()),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "kind": kind,
        **payload,
    }


def append_jsonl(path, record: dict) -> dict:
    """Append one record; safe for concurrent sweeps (single write)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a") as fh:
        fh.write(json.dumps(record, sort_keys=True, default=float) + "\n")
    return record


def read_jsonl(path) -> list[dict]:
    lines = Path(path).read_text().splitlines()
    return [json.loads(line) for line in lines if line.strip()]


def write_curves_csv(path, train_loss, val_accuracy) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_accuracy"])
        for i, (tl, va) in enumerate(zip(train_loss, val_accuracy)):
            writer.writerow([i, f"{tl:.6f}", f"{va:.6f}"])


def render_training_figure(path, train_loss, val_accuracy, title="") -> None:
    """Loss / validation-accuracy curves for one training run."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax1 = plt.subplots(figsize=(6.4, 4.0))
    epochs = range(len(train_loss))
    ax1.plot(epochs, train_loss, color="tab:blue", label="train loss")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("train loss", color="tab:blue")
    ax2 = ax1.twinx()
    ax2.plot(epochs, val_accuracy, color="tab:orange", label="val accuracy")
    ax2.set_ylabel("validation accuracy", color="tab:orange")
    ax2.set_ylim(0.4, 1.0)
    if title:
        ax1.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_sweep_csv(path, rows: list[dict], columns: list[str]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)


def render_ber_sweep_figure(path, sigmas, bers, title="") -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5.6, 3.8))
    ax.plot(sigmas, bers, marker="o")
    ax.set_xlabel("nominal noise sigma")
    ax.set_ylabel("bit error rate")
    ax.set_ylim(bottom=0)
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_batch_accuracy_figure(path, labels, accuracies, title="") -> None:
    """Accuracy-per-row summary for a recipe batch."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(max(5.0, 0.9 * len(labels) + 2), 3.8))
    xs = range(len(labels))
    ax.bar(xs, accuracies, color="tab:blue")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("test accuracy")
    ax.set_ylim(0.4, 1.0)
    ax.axhline(0.5, color="grey", lw=0.8, ls="--")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
