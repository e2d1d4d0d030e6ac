"""Matplotlib figures written next to CLI output tables."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_checks(checks: list, path) -> Path:
    """Bar chart of check deviations against their tolerances (log scale)."""
    names = [c["name"] for c in checks]
    vals = np.array([max(float(c["value"]), 1e-18) for c in checks])
    tols = np.array([float(c["tolerance"]) for c in checks])
    fig, ax = plt.subplots(figsize=(max(4.0, 0.6 * len(names) + 2), 3.5))
    colors = ["tab:green" if c["passed"] else "tab:red" for c in checks]
    ax.bar(range(len(names)), vals, color=colors)
    ax.scatter(range(len(names)), tols, marker="_", s=400, color="k", label="tolerance")
    ax.set_yscale("log")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=7)
    ax.set_ylabel("deviation")
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_trotter(steps, errors, slope: float, path) -> Path:
    steps, errors = np.asarray(steps, float), np.asarray(errors, float)
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.loglog(steps, errors, "o-", label=f"slope {slope:.3f}")
    ref = errors[0] * (steps / steps[0]) ** -2.0
    ax.loglog(steps, ref, "k--", lw=0.8, label="n^-2")
    ax.set_xlabel("Trotter steps n")
    ax.set_ylabel("state error")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_spectra(first, second, path, labels=("fermionic", "spin")) -> Path:
    first, second = np.sort(np.real(first)), np.sort(np.real(second))
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.plot(first, "o", mfc="none", label=labels[0])
    ax.plot(second, "x", label=labels[1])
    ax.set_xlabel("level")
    ax.set_ylabel("energy")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_mc(result, path) -> Path:
    """Running means of each observable per chain, plus acceptance."""
    obs = list(result.observables)
    fig, axes = plt.subplots(len(obs) + 1, 1, figsize=(5.5, 2.0 * (len(obs) + 1)), sharex=True)
    axes = np.atleast_1d(axes)
    for ax, o in zip(axes, obs):
        for s in result.samples[o.name]:
            s = np.real(np.asarray(s))
            ax.plot(np.cumsum(s) / np.arange(1, len(s) + 1), lw=0.7)
        est = result.estimate(o.name)
        ax.axhline(np.real(est.mean), color="k", lw=0.8)
        ax.set_ylabel(f"Re {o.name}", fontsize=8)
    for acc in result.acceptance:
        acc = np.asarray(acc)
        axes[-1].plot(np.cumsum(acc) / np.arange(1, len(acc) + 1), lw=0.7)
    axes[-1].set_ylabel("acceptance", fontsize=8)
    axes[-1].set_xlabel("sweep")
    return _save(fig, path)


def plot_scan(rows: list, x: str, ys, path) -> Path:
    xs = [float(r[x]) for r in rows]
    fig, axes = plt.subplots(len(ys), 1, figsize=(4.5, 2.4 * len(ys)), sharex=True)
    axes = np.atleast_1d(axes)
    for ax, y in zip(axes, ys):
        vals = [float(r[y]) for r in rows]
        ax.plot(xs, vals, "o-")
        ax.set_ylabel(y)
    axes[-1].set_xlabel(x)
    return _save(fig, path)
