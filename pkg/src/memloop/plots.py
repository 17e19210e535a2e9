"""Optional matplotlib rendering for the CLI report paths.

Figures are written to files next to the delimited output; nothing here is
needed for library use, so matplotlib is imported lazily.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .core import ExpPolyKernel, Trajectory


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def save_trajectories(series, path, *, title=None, ylabel="u(t)", hlines=()):
    """Plot labelled trajectories; ``series`` is a list of (Trajectory, label)."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for traj, label in series:
        vals = traj.values
        if vals.ndim == 1:
            ax.plot(traj.times, vals, label=label)
        else:
            for i in range(vals.shape[1]):
                ax.plot(traj.times, vals[:, i], label=f"{label} state {i}")
    for level, label in hlines:
        ax.axhline(level, color="gray", linestyle="--", linewidth=1, label=label)
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(ax.get_legend_handles_labels()[0]) <= 12:
        ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_kernels(entries, path, *, t_end=None, title=None):
    """Plot labelled kernels on [0, t_end]; ``entries`` is a list of
    (ExpPolyKernel, label)."""
    plt = _pyplot()
    if t_end is None:
        slowest = min(K.min_rate for K, _ in entries if K.terms)
        t_end = 8.0 / slowest
    t = np.linspace(0.0, t_end, 600)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for K, label in entries:
        ax.plot(t, kernels.kernel_eval(K, t), label=label)
    ax.set_xlabel("t")
    ax.set_ylabel("K(t)")
    if title:
        ax.set_title(title)
    if len(entries) <= 12:
        ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_spectrum(values, path, *, reference=None, title=None):
    """Scatter eigenvalues in the complex plane, optionally against
    reference roots."""
    plt = _pyplot()
    values = np.asarray(values, complex)
    fig, ax = plt.subplots(figsize=(6, 5))
    ax.scatter(values.real, values.imag, marker="x", label="eigenvalues")
    if reference is not None:
        reference = np.asarray(reference, complex)
        ax.scatter(
            reference.real, reference.imag, marker="o", facecolors="none",
            edgecolors="tab:red", label="reference roots",
        )
    ax.axhline(0, color="gray", linewidth=0.5)
    ax.axvline(0, color="gray", linewidth=0.5)
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
