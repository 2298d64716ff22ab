"""Figures written next to the CSV/JSON artifacts (headless Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .diagnostics import Trajectory, cesaro_curve  # noqa: E402


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    # fixed metadata keeps reruns byte-identical
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_trajectory(traj: Trajectory, path) -> Path:
    """Norm time series plus the Cesaro mean of ||grad||^2."""
    t = traj.times
    fig, axes = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax = axes[0]
    for name, label in (("l2sq", "||.||^2_L2"), ("h12sq", "||.||^2_H1/2"), ("gradsq", "||grad .||^2")):
        ax.plot(t, traj.column(name), label=label)
    ax.set_yscale("log")
    ax.legend(loc="best", fontsize=8)
    ax = axes[1]
    g = traj.column("gradsq")
    ax.plot(t, g, lw=0.8, label="||grad .||^2")
    if len(t) > 1:
        ax.plot(t, cesaro_curve(g, t), label="Cesaro mean")
    ax.set_xlabel("t")
    ax.legend(loc="best", fontsize=8)
    return _save(fig, path)


def plot_sweep(result, path) -> Path:
    """eps(nu) on log-log axes; excluded runs drawn hollow."""
    fig, ax = plt.subplots(figsize=(5, 4))
    for e in result.entries:
        if not np.isfinite(e.epsilon) or e.epsilon <= 0:
            continue
        ax.loglog(e.nu, e.epsilon, "o", color="C0", mfc="C0" if e.excluded is None else "none")
        if e.expected is not None:
            ax.loglog(e.nu, e.expected, "x", color="C1")
    ax.set_xlabel("nu")
    ax.set_ylabel("epsilon")
    ax.set_title(result.kind)
    return _save(fig, path)


def plot_delta(study, path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(study.t, study.delta, label="delta(t)")
    if study.delta[0] > 0:
        ax.plot(study.t, study.bound, "--", label="delta(0) exp(-2 nu int mu)")
    ax.axhline(study.delta_plus0, color="k", lw=0.5)
    ax.set_xlabel("t")
    ax.legend(loc="best", fontsize=8)
    return _save(fig, path)
