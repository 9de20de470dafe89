"""Figure rendering for the report-producing CLI commands.

Figures are written next to the delimited output; callers decide whether to
render at all (the CSV remains the primary interchange format).
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _finite(rows, attr):
    pairs = [(r.tau, getattr(r, attr)) for r in rows if not r.unstable]
    return [p[0] for p in pairs], [p[1] for p in pairs]


def save_sweep_figure(rows, a: float, path: str) -> str:
    """Delay, efficiency, and utility against the deadline; returns the path."""
    fig, axes = plt.subplots(1, 3, figsize=(12.5, 3.6))
    for ax, attr, label in zip(axes, ("d", "eta", "u"),
                               ("mean delay (s)", "offloading efficiency", "utility")):
        taus, ys = _finite(rows, attr)
        ax.plot(taus, ys, "-", lw=1.4)
        positive = [t for t in taus if t > 0]
        if positive and max(positive) / min(positive) > 100:
            ax.set_xscale("symlog", linthresh=min(positive))
        ax.set_xlabel("deadline (s)")
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
    axes[2].set_title(f"a = {a:g}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_compare_figure(records, path: str) -> str:
    """Utility of the three strategies against the preference weight."""
    a = [r.a for r in records]
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for attr, label, marker in (("u_onthespot", "on-the-spot", "s"),
                                ("u_pure", "pure", "^"),
                                ("u_ours", "deadline (optimal)", "o")):
        ax.plot(a, [getattr(r, attr) for r in records], marker=marker, ms=4,
                lw=1.2, label=label)
    ax.set_xlabel("preference weight a")
    ax.set_ylabel("utility")
    ax.set_ylim(bottom=min(0.0, min(r.u_pure for r in records)) - 0.05, top=1.05)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def figure_path(out_path: str) -> str:
    stem, dot, _ = out_path.rpartition(".")
    return (stem if dot else out_path) + ".png"
