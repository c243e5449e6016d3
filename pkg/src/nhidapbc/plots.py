"""Figure rendering for run outputs (headless, PNG files)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_figures(log, report, outdir, goals=None, safety_radius=0.0):
    """Render the standard figure set for one run into ``outdir``.

    goals: optional {agent_id: (x, y)} workspace targets for the path plot.
    Returns the list of files written.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    t = log.t

    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    for aid, tr in log.agents.items():
        (line,) = ax.plot(tr.q[:, 0], tr.q[:, 1], label=aid)
        ax.plot(tr.q[0, 0], tr.q[0, 1], "o", color=line.get_color(), ms=6)
        if goals and goals.get(aid) is not None:
            gx, gy = goals[aid][:2]
            ax.plot(gx, gy, "*", color=line.get_color(), ms=12)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title("workspace paths (o start, * goal)")
    ax.axis("equal")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    path = outdir / "trajectory.png"
    _save(fig, path)
    written.append(path)

    n_agents = len(log.agents)
    fig, axes = plt.subplots(n_agents, 1, figsize=(6, 2.2 * n_agents),
                             sharex=True, squeeze=False)
    for ax, (aid, tr) in zip(axes[:, 0], log.agents.items()):
        for i in range(tr.q.shape[1]):
            ax.plot(t, tr.q[:, i], label=f"q{i}")
        for ts in np.flatnonzero(np.diff(tr.mode)):
            ax.axvline(t[ts + 1], color="k", ls=":", lw=0.8)
        ax.set_ylabel(aid)
        ax.grid(alpha=0.3)
        ax.legend(fontsize=7, ncol=3)
    axes[-1, 0].set_xlabel("t [s]")
    axes[0, 0].set_title("generalized coordinates (dotted: branch switch)")
    path = outdir / "coordinates.png"
    _save(fig, path)
    written.append(path)

    fig, axes = plt.subplots(n_agents, 1, figsize=(6, 2.2 * n_agents),
                             sharex=True, squeeze=False)
    for ax, (aid, tr) in zip(axes[:, 0], log.agents.items()):
        for i in range(tr.tau.shape[1]):
            ax.plot(t, tr.tau[:, i], label=f"tau{i}")
        ax.set_ylabel(aid)
        ax.grid(alpha=0.3)
        ax.legend(fontsize=7, ncol=3)
    axes[-1, 0].set_xlabel("t [s]")
    axes[0, 0].set_title("control inputs")
    path = outdir / "controls.png"
    _save(fig, path)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6, 3.2))
    for aid, tr in log.agents.items():
        ax.plot(t, tr.h_d, label=aid)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("H_d [J]")
    ax.set_title("shaped energy per agent")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    path = outdir / "energy.png"
    _save(fig, path)
    written.append(path)

    if log.disagreement is not None:
        fig, ax = plt.subplots(figsize=(6, 3.2))
        ax.semilogy(t, np.maximum(log.disagreement, 1e-12))
        ax.set_xlabel("t [s]")
        ax.set_ylabel("max ||z_i - z_j|| [m]")
        ax.set_title("cooperative-variable disagreement")
        ax.grid(alpha=0.3, which="both")
        path = outdir / "consensus.png"
        _save(fig, path)
        written.append(path)

    if log.min_distance is not None:
        fig, ax = plt.subplots(figsize=(6, 3.2))
        ax.plot(t, log.min_distance)
        if safety_radius > 0:
            ax.axhline(safety_radius, color="r", ls="--", lw=1,
                       label=f"safety radius {safety_radius} m")
            ax.legend(fontsize=8)
        ax.set_xlabel("t [s]")
        ax.set_ylabel("min pairwise distance [m]")
        ax.set_title("inter-agent separation")
        ax.grid(alpha=0.3)
        path = outdir / "distance.png"
        _save(fig, path)
        written.append(path)

    return written
