"""Render report figures from a finished run's metrics rows."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.patches import Rectangle

from .spectrum import Band

_SN_COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"]


def _sn_color(sn_ids: list[str], sn_id: str) -> str:
    return _SN_COLORS[sn_ids.index(sn_id) % len(_SN_COLORS)]


def allocation_timeline(rows: list[dict], band: Band, path: Path) -> None:
    """Spectrum occupancy over time, one colored band segment per SN.

    Each COMMIT row carries the full plan; segments extend until the next
    commit or the end of the run.
    """
    commits = [r for r in rows if r["kind"] == "COMMIT"]
    end_time = rows[-1]["time_ms"] if rows else 0
    sn_ids = sorted({r["sn_id"] for r in rows if r["sn_id"]})

    fig, ax = plt.subplots(figsize=(10, 5))
    for idx, row in enumerate(commits):
        t0 = row["time_ms"]
        t1 = commits[idx + 1]["time_ms"] if idx + 1 < len(commits) else end_time
        for alloc in row.get("plan_allocations", []):
            ax.add_patch(
                Rectangle(
                    (t0 / 1000.0, alloc["start_mhz"]),
                    max((t1 - t0) / 1000.0, 0.05),
                    alloc["width_mhz"],
                    facecolor=_sn_color(sn_ids, alloc["sn_id"]),
                    edgecolor="black",
                    linewidth=0.4,
                    alpha=0.8,
                )
            )
    handles = [
        Rectangle((0, 0), 1, 1, facecolor=_sn_color(sn_ids, sn)) for sn in sn_ids
    ]
    ax.legend(handles, sn_ids, loc="upper right", fontsize=8)
    ax.set_xlim(0, max(end_time / 1000.0, 1.0))
    ax.set_ylim(band.lo_mhz, band.hi_mhz)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("frequency [MHz]")
    ax.set_title("Spectrum allocation over time")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def utilization_curve(rows: list[dict], path: Path) -> None:
    times = [r["time_ms"] / 1000.0 for r in rows]
    utils = [r["utilization"] for r in rows]
    fig, ax = plt.subplots(figsize=(10, 3))
    ax.step(times, utils, where="post")
    ax.set_ylim(0, 1.05)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("band utilization")
    ax.set_title("Overlayer band utilization")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_figures(rows: list[dict], band: Band, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    timeline = out_dir / "allocation_timeline.png"
    utilization = out_dir / "utilization.png"
    allocation_timeline(rows, band, timeline)
    utilization_curve(rows, utilization)
    return [timeline, utilization]
