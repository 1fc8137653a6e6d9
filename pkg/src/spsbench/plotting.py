"""Report figures: success-rate and acceleration curves per scene type."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

PLANNER_STYLE = {
    "sps": {"color": "#1f77b4", "marker": "o"},
    "grid": {"color": "#d62728", "marker": "s"},
}


def _cell_series(rows, scene_type, field):
    series = {}
    for r in rows:
        if r["scene_type"] != scene_type:
            continue
        series.setdefault(r["planner"], []).append((float(r["speed"]), float(r[field])))
    for planner in series:
        series[planner].sort()
    return series


def _style(planner):
    return PLANNER_STYLE.get(planner, {"color": "gray", "marker": "x"})


def save_success_rate_figure(summary_rows, scene_type: str, out_dir) -> Path:
    series = _cell_series(summary_rows, scene_type, "success_rate")
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for planner, pts in sorted(series.items()):
        xs, ys = zip(*pts)
        ax.plot(xs, ys, label=planner, **_style(planner))
    ax.set_xlabel("speed (m/s)")
    ax.set_ylabel("success rate")
    ax.set_ylim(-0.02, 1.05)
    ax.set_title(f"success rate, {scene_type}")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    path = Path(out_dir) / f"success_rate_{scene_type}.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_acceleration_figure(summary_rows, scene_type: str, out_dir) -> Path:
    fig, axes = plt.subplots(1, 2, figsize=(8.0, 3.6), sharex=True)
    for ax, field, label in zip(axes, ("mean_accel", "max_accel"), ("mean", "peak")):
        series = _cell_series(summary_rows, scene_type, field)
        for planner, pts in sorted(series.items()):
            xs, ys = zip(*pts)
            ax.plot(xs, ys, label=planner, **_style(planner))
        ax.set_xlabel("speed (m/s)")
        ax.set_ylabel(f"{label} acceleration (m/s^2)")
        ax.grid(alpha=0.3)
    axes[0].legend()
    fig.suptitle(f"acceleration, {scene_type}")
    fig.tight_layout()
    path = Path(out_dir) / f"acceleration_{scene_type}.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_report_figures(summary_rows, out_dir) -> list[Path]:
    """One success-rate and one acceleration figure per scene type."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for scene_type in sorted({r["scene_type"] for r in summary_rows}):
        paths.append(save_success_rate_figure(summary_rows, scene_type, out))
        paths.append(save_acceleration_figure(summary_rows, scene_type, out))
    return paths
