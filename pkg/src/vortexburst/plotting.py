"""Figures for the CLI reports, rendered off-screen to files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from scipy import stats  # noqa: E402

from .dynamics import Burst, EventTrajectory  # noqa: E402
from .selfsimilar import SelfSimilarParams, self_similar_positions  # noqa: E402


def _save(fig, path) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def plot_trajectory(traj: EventTrajectory, path) -> str:
    """Vortex paths in the plane; bursts as stars, merges as crosses."""
    fig, ax = plt.subplots(figsize=(5.5, 5.0))
    for seg in traj.segments:
        if seg.times.size < 2:
            continue
        for j in range(seg.n):
            colour = "tab:red" if seg.intensities[j] > 0 else "tab:blue"
            ax.plot(seg.positions[:, j].real, seg.positions[:, j].imag, lw=0.8, color=colour)
    for ev in traj.events:
        marker = "*" if isinstance(ev, Burst) else "x"
        ax.plot(ev.position.real, ev.position.imag, marker, color="k", ms=9)
    if traj.segments[0].geometry == "disk":
        ang = np.linspace(0, 2 * np.pi, 400)
        ax.plot(np.cos(ang), np.sin(ang), color="0.5", lw=0.8)
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title("vortex paths (red: positive, blue: negative)")
    return _save(fig, path)


def plot_energy(traj: EventTrajectory, path) -> str:
    """Hamiltonian along each segment with event times marked."""
    fig, ax = plt.subplots(figsize=(6.0, 3.5))
    for seg in traj.segments:
        H = np.atleast_1d(seg.hamiltonian())
        if seg.times.size > 1:
            ax.plot(seg.times, H, lw=1.2)
        else:
            ax.plot(seg.times, H, "o", ms=4)
    for ev in traj.events:
        ax.axvline(ev.t, color="0.6", ls="--", lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("energy")
    ax.set_title("energy per segment")
    return _save(fig, path)


def plot_weak_residual(report, path) -> str:
    """Largest residual over the test battery against time."""
    fig, ax = plt.subplots(figsize=(6.0, 3.5))
    worst = np.max(np.abs(report.residual), axis=0)
    ax.semilogy(report.checkpoints, np.maximum(worst, 1e-300), lw=1.0, label="max |residual|")
    ax.axhline(report.tolerance, color="tab:red", ls="--", lw=1.0, label="tolerance")
    ax.set_xlabel("t")
    ax.set_ylabel("residual")
    ax.set_ylim(bottom=max(1e-18, float(np.min(worst[worst > 0])) / 10) if np.any(worst > 0) else 1e-18)
    ax.legend(loc="lower right")
    ax.set_title("weak formulation residual")
    return _save(fig, path)


def plot_selfsimilar(p: SelfSimilarParams, eigenvalues, path) -> str:
    """Spiral paths of the explicit burst and the spectrum of its linearization."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 4.2))
    t = np.logspace(-6, 0, 600)
    z = self_similar_positions(p, t)
    for j in range(3):
        ax1.plot(z[:, j].real, z[:, j].imag, lw=1.0, label=f"intensity {p.intensities[j]:+.3g}")
    ax1.plot(0, 0, "k*", ms=9)
    ax1.set_aspect("equal", adjustable="datalim")
    ax1.legend(fontsize=8)
    ax1.set_title("self-similar burst, t in [1e-6, 1]")
    ev = np.asarray(eigenvalues)
    ax2.plot(ev.real / p.a, ev.imag / p.a, "o")
    ax2.axvline(-1.0, color="0.6", ls="--", lw=0.8)
    ax2.axhline(0.0, color="0.8", lw=0.6)
    ax2.set_xlabel("Re / a")
    ax2.set_ylabel("Im / a")
    ax2.set_title("linearization spectrum")
    return _save(fig, path)


def plot_markov(summary, path) -> str:
    """Burst-count histogram against the Poisson law and the energy jump totals."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.8))
    counts = summary.burst_counts
    k = np.arange(0, max(int(counts.max()) if counts.size else 0, 1) + 2)
    ax1.hist(counts, bins=np.arange(k[-1] + 1) - 0.5, density=True, alpha=0.6, label="samples")
    ax1.plot(k, stats.poisson(summary.rate * summary.horizon).pmf(k), "ko-", ms=3, label="Poisson")
    ax1.set_xlabel("bursts per sample")
    ax1.legend()
    totals = [sum(s.energy_jumps) for s in summary.samples]
    ax2.hist(totals, bins=30, alpha=0.7)
    ax2.set_xlabel("total energy jump")
    return _save(fig, path)
