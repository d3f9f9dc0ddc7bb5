"""Figures written next to the CSV outputs."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "font.family": "serif",
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "grid.linestyle": "--",
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def figure(width=4.5, height=None):
    golden = (5**0.5 - 1) / 2
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(width, height or width * golden))
    return fig, ax


def save(fig, path: str | Path) -> Path:
    path = Path(path)
    with plt.rc_context(STYLE):
        fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_queue(trace, bound: float, path: str | Path) -> Path:
    """Virtual queue per frame against its deterministic bound."""
    fig, ax = figure()
    q = [fr.q_before for fr in trace.frames] + ([trace.frames[-1].q_after] if trace.frames else [])
    ax.plot(range(len(q)), q, color="C0", label="Q[f]")
    ax.axhline(bound, color="C3", ls="--", label="bound")
    ax.set_xlabel("frame")
    ax.set_ylabel("virtual queue")
    ax.legend(loc="lower right")
    return save(fig, path)


def plot_sweep(rows: Sequence, path: str | Path, theta: float | None = None) -> Path:
    """Mean delay vs V with 3-SE bars; with ``theta`` also theta + C_0/V."""
    fig, ax = figure()
    v = [r.v for r in rows]
    ax.errorbar(v, [r.mean_delay for r in rows], yerr=[3 * r.se_delay for r in rows],
                marker="o", capsize=2, label="simulated delay")
    if theta is not None:
        ax.axhline(theta, color="k", lw=0.8, label=r"$\theta^*$")
        ax.plot(v, [theta + r.c0 / r.v for r in rows], color="C3", ls="--", label=r"$\theta^*+C_0/V$")
        top = max(r.mean_delay + 3 * r.se_delay for r in rows)
        ax.set_ylim(min(theta, min(r.mean_delay for r in rows)) * 0.98, top * 1.1)
    ax.set_xscale("log")
    ax.set_xlabel("V")
    ax.set_ylabel("slots / packet")
    ax.legend()
    return save(fig, path)


def plot_frontiers(frontiers: Sequence, path: str | Path) -> Path:
    fig, ax = figure()
    for n, fr in enumerate(frontiers):
        ax.scatter(fr.surplus, fr.expected_length, s=4, alpha=0.3, color=f"C{n}")
        env = [fr.point(c) for c in fr.envelope]
        ax.plot([p[0] for p in env], [p[1] for p in env], marker="o", color=f"C{n}", label=f"L={fr.length}")
    ax.axvline(0.0, color="k", lw=0.8)
    ax.set_xlabel("expected power surplus per frame")
    ax.set_ylabel("expected frame length")
    ax.legend()
    return save(fig, path)
