"""Static SVG figures for the scenario runner.

Only imported when ``--plots`` is requested. The Agg backend is forced so
runs work headless, and SVG metadata is pinned so reruns are byte-stable.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

RC = {
    "font.family": "DejaVu Sans",
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.figsize": (4.5, 3.0),
    "svg.hashsalt": "pcmtrace",
    "svg.fonttype": "path",
}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return path


def drift_curves(curves: dict[str, tuple[list[float], list[float]]], path) -> Path:
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        for name, (t, r) in curves.items():
            ax.plot(t, [x / 1e6 for x in r], marker="o", ms=2.5, lw=0.8, label=name)
        ax.set_xscale("log")
        ax.set_xlabel("time since RESET (s)")
        ax.set_ylabel("resistance (MΩ)")
        ax.legend(frameon=False)
        return _save(fig, path)


def single_trace(t, g_tagged, g_control, tag_times, path, ideal=None) -> Path:
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        ax.plot(t, [g * 1e6 for g in g_tagged], label="tagged")
        ax.plot(t, [g * 1e6 for g in g_control], ls="--", color="0.5", label="control")
        for s in tag_times:
            ax.axvline(s, color="C3", lw=0.5, alpha=0.6)
        ax.set_xlabel("time (s)")
        ax.set_ylabel("conductance (µS)")
        if ideal is not None:
            ax2 = ax.twinx()
            ax2.plot(t, ideal, color="C2", lw=0.8, label="exponential")
            ax2.set_ylabel("exponential trace")
            ax2.spines["right"].set_visible(True)
        ax.legend(frameon=False, loc="upper right")
        return _save(fig, path)


def multi_trace(t, per_device, g_eff, tag_times, t_reward, path) -> Path:
    with plt.rc_context(RC):
        fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(4.5, 4.2))
        for i, r in enumerate(per_device):
            ax1.plot(t, [x / 1e6 for x in r], label=f"device {i}")
        ax1.axhline(2.0, color="0.6", lw=0.6, ls=":")
        ax1.set_ylabel("resistance (MΩ)")
        ax1.legend(frameon=False)
        ax2.plot(t, [g * 1e6 for g in g_eff], color="k")
        for s in tag_times:
            ax2.axvline(s, color="C3", lw=0.4, alpha=0.5)
        ax2.axvline(t_reward, color="C2", lw=1.0, ls="--")
        ax2.set_xlabel("time (s)")
        ax2.set_ylabel("effective trace (µS)")
        return _save(fig, path)


def capacity(ns, caps, path) -> Path:
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        ax.plot(ns, caps, marker="s")
        ax.set_xlabel("devices per trace")
        ax.set_ylabel("tags before first rejection")
        ax.set_xticks(list(ns))
        return _save(fig, path)


def learning(seeds, pre, post, path) -> Path:
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        for s, a, b in zip(seeds, pre, post):
            ax.plot([0, 1], [a, b], color="C0" if b > a else "C3", marker="o", ms=3, lw=0.8)
        ax.set_xticks([0, 1], ["before", "after"])
        ax.set_xlim(-0.3, 1.3)
        ax.set_ylim(-0.05, 1.05)
        ax.set_ylabel("reward rate")
        return _save(fig, path)
