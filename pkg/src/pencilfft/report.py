"""Render timing figures from benchmark results.

Works from the summary (run="best") rows of the CSV matrix: one figure
of wall time against rank count, and one of speedup relative to each
configuration's smallest measured rank count.  Figures are written as
PNG files next to whatever delimited output the caller keeps.
"""

from __future__ import annotations

import csv
import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402 - backend must be pinned first


def load_rows(csv_path) -> list:
    with open(csv_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, restkey="reason")
        return list(reader)


def _best_rows(rows):
    for row in rows:
        if row.get("run") == "best" and row.get("wall_max_s"):
            yield row


def _grouped(rows):
    """{(size, scheme, option, k, transport): [(ranks, best wall_max_s), ...]}"""
    groups = defaultdict(list)
    for row in _best_rows(rows):
        key = (row["size"], row["scheme"], row["option"], row["k"], row["transport"])
        groups[key].append((int(row["ranks"]), float(row["wall_max_s"])))
    for points in groups.values():
        points.sort()
    return groups

def _label(key) -> str:
    size, scheme, option, k, _transport = key
    return f"{size}^3 {scheme} opt{option} k={k}" if "x" not in size else \
        f"{size} {scheme} opt{option} k={k}"


def render_from_rows(rows, out_dir) -> list:
    """Write timing (and, when possible, speedup) figures; returns file paths."""
    os.makedirs(out_dir, exist_ok=True)
    groups = _grouped(rows)
    written = []
    if not groups:
        return written

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for key, points in sorted(groups.items()):
        ranks = [p for p, _ in points]
        walls = [w for _, w in points]
        ax.plot(ranks, walls, marker="o", label=_label(key))
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("ranks")
    ax.set_ylabel("best wall time, max over ranks [s]")
    ax.set_title("Forward transform wall time")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    timing_path = os.path.join(out_dir, "timing.png")
    fig.savefig(timing_path, dpi=150)
    plt.close(fig)
    written.append(timing_path)

    multi = {k: v for k, v in groups.items() if len(v) >= 2}
    if multi:
        fig, ax = plt.subplots(figsize=(7.0, 4.5))
        ideal_ranks = set()
        for key, points in sorted(multi.items()):
            base_ranks, base_wall = points[0]
            ranks = [p for p, _ in points]
            speedup = [base_wall / w if w > 0 else float("nan") for _, w in points]
            ideal_ranks.update(ranks)
            ax.plot(ranks, speedup, marker="o", label=_label(key))
        ideal = sorted(ideal_ranks)
        base = min(ideal)
        ax.plot(ideal, [p / base for p in ideal], linestyle="--", color="gray",
                label="ideal")
        ax.set_xscale("log", base=2)
        ax.set_yscale("log", base=2)
        ax.set_xlabel("ranks")
        ax.set_ylabel("speedup vs smallest measured rank count")
        ax.set_title("Strong-scaling speedup")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=8)
        fig.tight_layout()
        speedup_path = os.path.join(out_dir, "speedup.png")
        fig.savefig(speedup_path, dpi=150)
        plt.close(fig)
        written.append(speedup_path)
    return written


def render_figures(csv_path, out_dir) -> list:
    return render_from_rows(load_rows(csv_path), out_dir)
