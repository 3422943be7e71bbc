"""Report output: delimited tables, event logs, and figure rendering.

Every file starts with a ``#``-prefixed metadata header (tool version,
schema version, resolved configuration, master seed - everything needed
to reproduce the run; deliberately no timestamps, so identical runs give
identical bytes). Tables are whitespace-separated columns; event logs are
plain CSV sorted by (traj_id, t). Figures are rendered to PNG files next
to the tables with matplotlib's file-only Agg backend; matplotlib is
imported lazily so data-only runs never pay for it.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .ensemble import EnsembleReport

__all__ = [
    "metadata_lines",
    "write_table",
    "write_events_csv",
    "render_population_figure",
    "render_event_figure",
    "render_compare_figure",
]

_FLOAT_FORMAT = "%.12g"


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return _FLOAT_FORMAT % value
    return str(value)


def metadata_lines(meta: dict) -> list[str]:
    return [f"# {key}: {value}" for key, value in meta.items()]


def write_table(path, meta: dict, columns: list[str], rows) -> None:
    lines = metadata_lines(meta)
    lines.append("# columns: " + " ".join(columns))
    for row in rows:
        lines.append(" ".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_events_csv(path, meta: dict, events) -> None:
    """Event log: one row per classical event, sorted by (traj_id, t)."""
    lines = metadata_lines(meta)
    lines.append("traj_id,t,from_alpha,to_alpha")
    for ev in events:
        lines.append(f"{ev.traj_id},{_FLOAT_FORMAT % ev.t},{ev.from_alpha},{ev.to_alpha}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    return plt


def render_population_figure(path, times, probs, labels, title: str) -> Path:
    """Classical sector probabilities over time."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    probs = np.asarray(probs)
    for a, label in enumerate(labels):
        ax.plot(times, probs[:, a], label=label)
    ax.set_xlabel("t")
    ax.set_ylabel("sector probability")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title(title)
    ax.legend(loc="best", fontsize=9)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def render_event_figure(path, report: EnsembleReport, labels, title: str) -> Path:
    """First-event time histograms per channel, stacked axes."""
    plt = _pyplot()
    stats = report.event_histograms
    channels = sorted(stats.first_event_hist) or [None]
    fig, axes = plt.subplots(
        len(channels), 1, figsize=(6.4, 2.2 * len(channels)), squeeze=False
    )
    edges = stats.bin_edges
    centers = 0.5 * (edges[:-1] + edges[1:])
    width = edges[1] - edges[0]
    for ax, channel in zip(axes[:, 0], channels):
        if channel is None:
            ax.text(0.5, 0.5, "no events", ha="center", va="center", transform=ax.transAxes)
            ax.set_axis_off()
            continue
        fa, ta = channel
        ax.bar(centers, stats.first_event_hist[channel], width=width, align="center")
        ax.set_ylabel("count")
        ax.set_title(f"first event {labels[fa - 1]} -> {labels[ta - 1]}", fontsize=9)
    axes[-1, 0].set_xlabel("t")
    fig.suptitle(title, fontsize=10)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def render_compare_figure(path, rows, threshold: float, title: str) -> Path:
    """Ensemble-vs-exact distances over the grid, with the pass threshold."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    times = [r[0] for r in rows]
    ax.plot(times, [r[1] for r in rows], marker="o", ms=3, label="trace distance")
    ax.plot(times, [r[2] for r in rows], marker="s", ms=3, label="classical TV distance")
    ax.axhline(threshold, color="k", ls="--", lw=1, label=f"threshold {threshold:.3g}")
    ax.set_xlabel("t")
    ax.set_ylabel("distance")
    ax.set_title(title)
    ax.legend(loc="best", fontsize=9)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out
