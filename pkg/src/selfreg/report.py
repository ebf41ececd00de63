"""Post-hoc figures from trace files.

The engine itself never draws; traces are line-delimited data designed
for external plotting, and this module is that external plotter. Given a
trace (and optionally its metrics file) it writes a small set of PNG
figures plus a per-root allocation CSV next to them.
"""

from __future__ import annotations

import csv
import os
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .harness import TraceEvent, compute_metrics


def _root_series(trace: Sequence[TraceEvent], field: str) -> dict[str, list[float]]:
    roots = sorted(trace[0].roots)
    return {rid: [ev.roots[rid][field] for ev in trace] for rid in roots}


def render_report(
    trace: Sequence[TraceEvent], out_dir: str, stem: str = "episode"
) -> list[str]:
    """Write figures and the allocation table; returns the created paths."""
    if not trace:
        raise ValueError("cannot render a report for an empty trace")
    os.makedirs(out_dir, exist_ok=True)
    ticks = [ev.tick for ev in trace]
    roots = sorted(trace[0].roots)
    written: list[str] = []

    def save(fig, name: str) -> None:
        path = os.path.join(out_dir, f"{stem}_{name}.png")
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    # Reservoirs and discrepancies per root need
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(9, 6), sharex=True)
    for rid, series in _root_series(trace, "reservoir").items():
        ax1.plot(ticks, series, label=rid, linewidth=0.9)
    ax1.set_ylabel("reservoir")
    ax1.legend(loc="upper right", fontsize=8)
    for rid, series in _root_series(trace, "discrepancy").items():
        ax2.plot(ticks, series, linewidth=0.9)
    ax2.set_ylabel("discrepancy")
    ax2.set_xlabel("tick")
    save(fig, "needs")

    # Valence per root need
    fig, ax = plt.subplots(figsize=(9, 3.2))
    for rid, series in _root_series(trace, "valence").items():
        ax.plot(ticks, series, label=rid, linewidth=0.9)
    ax.axhline(0.0, color="grey", linewidth=0.6)
    ax.set_ylabel("valence")
    ax.set_xlabel("tick")
    ax.set_ylim(-1.05, 1.05)
    ax.legend(loc="upper right", fontsize=8)
    save(fig, "affect")

    # Shield strength with switch/abandonment markers
    fig, ax = plt.subplots(figsize=(9, 3.2))
    ax.plot(ticks, [ev.sigma for ev in trace], color="tab:blue", linewidth=0.9,
            label="shield")
    forced = [(ev.tick, ev.sigma) for ev in trace if ev.forced_switch]
    if forced:
        ax.plot(*zip(*forced), "rv", markersize=4, linestyle="none",
                label="forced switch")
    dropped = [(ev.tick, ev.sigma) for ev in trace if ev.abandoned]
    if dropped:
        ax.plot(*zip(*dropped), "kx", markersize=4, linestyle="none",
                label="abandonment")
    ax.set_ylabel("sigma")
    ax.set_xlabel("tick")
    ax.set_ylim(0, 1.05)
    ax.legend(loc="upper right", fontsize=8)
    save(fig, "shield")

    # Attribution timeline: which root each tick's effort went to
    fig, ax = plt.subplots(figsize=(9, 2.2 + 0.3 * len(roots)))
    index = {rid: i for i, rid in enumerate(roots)}
    xs = [ev.tick for ev in trace if ev.pursued_root_need is not None]
    ys = [index[ev.pursued_root_need] for ev in trace if ev.pursued_root_need is not None]
    ax.scatter(xs, ys, s=2, marker="|")
    ax.set_yticks(range(len(roots)), roots)
    ax.set_xlabel("tick")
    ax.set_title("tick attribution", fontsize=9)
    save(fig, "attribution")

    # Delimited allocation summary alongside the figures
    metrics = compute_metrics(trace)
    counts = {rid: 0 for rid in roots}
    for ev in trace:
        if ev.pursued_root_need is not None:
            counts[ev.pursued_root_need] += 1
    total = max(1, sum(counts.values()))
    csv_path = os.path.join(out_dir, f"{stem}_allocation.csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["root_need", "attributed_ticks", "share"])
        for rid in roots:
            writer.writerow([rid, counts[rid], f"{counts[rid] / total:.6f}"])
        writer.writerow([])
        writer.writerow(["metric", "value", ""])
        for key, value in metrics.to_dict().items():
            writer.writerow([key, value, ""])
    written.append(csv_path)
    return written
