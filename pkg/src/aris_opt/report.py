"""Figure rendering for run artifacts; written next to the CSV outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .optimizer import AoState


def render_run_figures(outdir: Path, state: AoState) -> list[Path]:
    """Top-down trajectory + altitude profile, and the convergence curve."""
    outdir = Path(outdir)
    scenario = state.scenario
    traj = state.trajectory
    paths = []

    fig, (ax_top, ax_alt) = plt.subplots(1, 2, figsize=(10, 4))
    q = traj.horizontal
    ax_top.plot(q[:, 0], q[:, 1], "-o", ms=2.5, lw=1.2, label="way-points")
    for i, node in enumerate(scenario.nodes, start=1):
        ax_top.plot(*node.position, "s", ms=9, label=f"GN {i}")
    ax_top.plot(*scenario.limits.start, "g^", ms=9, label="start")
    ax_top.plot(*scenario.limits.finish, "rv", ms=9, label="finish")
    ax_top.set_xlabel("x (m)")
    ax_top.set_ylabel("y (m)")
    ax_top.set_title(f"{state.config.scheme.upper()} trajectory (top view)")
    ax_top.legend(fontsize=8)
    ax_top.axis("equal")
    ax_top.grid(alpha=0.3)
    slots = np.arange(1, scenario.n_slots + 1)
    ax_alt.plot(slots, traj.vertical, "-o", ms=2.5, lw=1.2)
    ax_alt.axhline(scenario.limits.h_min, color="gray", ls=":", lw=1)
    ax_alt.axhline(scenario.limits.h_max, color="gray", ls=":", lw=1)
    ax_alt.set_xlabel("slot")
    ax_alt.set_ylabel("altitude (m)")
    ax_alt.set_title("altitude profile")
    ax_alt.grid(alpha=0.3)
    fig.tight_layout()
    path = outdir / "trajectory.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    paths.append(path)

    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.plot(np.arange(1, len(state.eta_history) + 1), state.eta_history, "-o", ms=3)
    ax.set_xlabel("iteration")
    ax.set_ylabel("min average rate (bps/Hz)")
    ax.set_title("convergence")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path = outdir / "convergence.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    paths.append(path)
    return paths


def render_sweep_figure(outdir: Path, rows) -> Path:
    """Rate-versus-sweep-value curves, one line per scheme."""
    outdir = Path(outdir)
    by_scheme: dict[str, list[tuple[float, float]]] = {}
    for value, scheme, eta in rows:
        by_scheme.setdefault(scheme, []).append((value, eta))
    fig, ax = plt.subplots(figsize=(5.5, 4))
    markers = {"plc": "o", "plcfa": "s", "dlc": "^"}
    for scheme, pts in by_scheme.items():
        pts = sorted(pts)
        ax.plot(
            [p[0] for p in pts], [p[1] for p in pts],
            marker=markers.get(scheme, "x"), label=scheme.upper(),
        )
    ax.set_xlabel("sweep value")
    ax.set_ylabel("min average rate (bps/Hz)")
    ax.set_title("scheme comparison")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path = outdir / "sweep.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
