"""Machine-readable reports and companion figures.

JSON reports are written with sorted keys so identical runs produce
identical bytes (only the wall-clock field varies).  Figures are rendered
headlessly to PNG next to the delimited output.
"""

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def write_json_report(path, payload):
    """Write *payload* as stable, sorted JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_table_csv(path, rows, columns):
    """Write dict rows under the given column order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row.get(col, "") for col in columns])
    return path


def plot_objective_trajectory(trajectory, path, title="Objective"):
    """Objective value against iteration, linear-log when it helps."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(range(len(trajectory)), trajectory, lw=1.5)
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_sweep(lambdas, train_acc, test_acc, path, best_lambda=None):
    """Train/test accuracy against the regularization weight (log axis)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogx(lambdas, train_acc, "o-", label="train")
    ax.semilogx(lambdas, test_acc, "s-", label="test")
    if best_lambda is not None and best_lambda > 0:
        ax.axvline(best_lambda, color="gray", ls="--", lw=1, label="best")
    ax.set_xlabel("regularization weight")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0.0, 1.05)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_compare(kinds, train_acc, test_acc, path):
    """Grouped bars of train/test accuracy per regularizer kind."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pos = range(len(kinds))
    width = 0.38
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar([p - width / 2 for p in pos], train_acc, width, label="train")
    ax.bar([p + width / 2 for p in pos], test_acc, width, label="test")
    ax.set_xticks(list(pos))
    ax.set_xticklabels(kinds)
    ax.set_ylabel("accuracy")
    ax.set_ylim(0.0, 1.05)
    ax.legend()
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
