"""Optional figures for the ``report`` command (Agg backend, files only)."""

from __future__ import annotations

import os
from typing import List

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path):
    # drop the software/date metadata so reruns write identical files
    fig.savefig(path, dpi=100, metadata={"Software": None})


def write_figures(directory: str, trace, p_start, cert=None) -> List[str]:
    """Newton convergence and density displacement plots. Returns the file
    names written (relative to ``directory``)."""
    plt = _pyplot()
    os.makedirs(directory, exist_ok=True)
    names = []

    fig, ax = plt.subplots(figsize=(5, 3.5))
    grads = [s.grad_norm for s in trace.iterates]
    steps = [s.step_norm for s in trace.iterates if np.isfinite(s.step_norm)]
    floor = 1e-18
    ax.semilogy(range(len(grads)), np.maximum(grads, floor), "o-", label="gradient norm")
    if steps:
        ax.semilogy(range(len(steps)), np.maximum(steps, floor), "s--", label="step norm")
    if cert is not None and cert.valid and cert.tau_star:
        ax.axhline(cert.tau_star, color="grey", lw=0.8, label="tau*")
    ax.set_xlabel("iteration")
    ax.set_ylabel("1,inf norm")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, os.path.join(directory, "newton_convergence.png"))
    plt.close(fig)
    names.append("newton_convergence.png")

    fig, ax = plt.subplots(figsize=(4, 3.5))
    diff = np.abs(trace.final_point.p - np.asarray(p_start))
    im = ax.imshow(diff, cmap="viridis")
    fig.colorbar(im, ax=ax)
    ax.set_title("|P_final - P0|")
    fig.tight_layout()
    _save(fig, os.path.join(directory, "density_displacement.png"))
    plt.close(fig)
    names.append("density_displacement.png")
    return names
