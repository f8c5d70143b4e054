"""Optional PNG rendering for the CLI ``--figures`` flag. CSV output stays the contract."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_solution(sol, path: str | Path, title: str = "") -> Path:
    """Strategy weights, signaling coefficient and learning paths on one sheet."""
    c = sol.coefficients
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.5))
    for j, name in enumerate(("beta0", "beta1", "beta2", "beta3")):
        axes[0].plot(c.t, c.beta[:, j], label=name)
    axes[0].legend(fontsize=8)
    axes[0].set_title("strategy weights")
    axes[1].plot(c.t, c.alpha3)
    axes[1].set_title("alpha3")
    axes[2].plot(c.t, c.gamma, label="gamma")
    axes[2].plot(c.t, c.chi, label="chi")
    axes[2].legend(fontsize=8)
    axes[2].set_title("learning")
    for ax in axes:
        ax.set_xlabel("t")
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_sweep(axis: str, values, rows_per_cell, path: str | Path) -> Path:
    """alpha3 paths of every solved cell; ``rows_per_cell`` holds coefficient tables or None."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for v, rows in zip(values, rows_per_cell):
        if rows is not None:
            ax.plot(rows[:, 0], rows[:, 7], label=f"{axis}={v:g}")
    ax.set_xlabel("t")
    ax.set_ylabel("alpha3")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
