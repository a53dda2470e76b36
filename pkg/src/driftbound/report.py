"""Optional figure rendering for experiment outputs.

Tables stay the primary artifact; these helpers render companion matplotlib
figures to files when a run asks for them (``--figures`` on the CLI).
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .heavytraffic import HtResult


def save_heavy_traffic_figure(result: HtResult, path) -> Path:
    """Ratio curves against drift, with the asymptote and theta-limit marked."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    drifts = [row.a for row in result.rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.6))

    bound_ratios = [row.bound_ratio for row in result.rows]
    ax1.plot(drifts, bound_ratios, "o-", label="bound / asymptote")
    mc_pts = [(row.a, row.mc_ratio, row.mc_stderr / row.asymptote)
              for row in result.rows if row.mc_ratio is not None]
    if mc_pts:
        xs, ys, es = zip(*mc_pts)
        ax1.errorbar(xs, ys, yerr=[3 * e for e in es], fmt="s", capsize=3,
                     label="Monte Carlo / asymptote (3 s.e.)")
    ax1.axhline(1.0, color="k", lw=0.8, ls=":")
    ax1.axhline(result.theta_limit, color="tab:red", lw=0.8, ls="--",
                label=f"theta^-r = {result.theta_limit:.3g}")
    ax1.set_xscale("log")
    ax1.set_yscale("log")
    ax1.invert_xaxis()
    ax1.set_xlabel("drift a")
    ax1.set_ylabel("ratio to asymptote")
    ax1.legend(fontsize=8)
    ax1.set_title(f"{result.track} track: theta={result.theta}, t={result.t}")

    conds = [row.cond for row in result.rows]
    ax2.plot(drifts, conds, "o-", color="tab:green")
    if result.t4_threshold is not None:
        ax2.axhline(result.t4_threshold, color="tab:red", lw=0.8, ls="--",
                    label=f"threshold {result.t4_threshold:.4g}")
        ax2.legend(fontsize=8)
    ax2.set_xscale("log")
    ax2.invert_xaxis()
    ax2.set_xlabel("drift a")
    ax2.set_ylabel(result.cond_column)
    ax2.set_title("schedule condition")

    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_sweep_figure(rows, path, oracle=None) -> Path:
    """Minimum valid bound per threshold, optionally against an exact oracle.

    ``rows`` are the sweep records (dicts with at least x and best_value);
    ``oracle`` maps x to an exact probability when one exists.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    xs = [r["x"] for r in rows if not math.isnan(r["best_value"])]
    ys = [r["best_value"] for r in rows if not math.isnan(r["best_value"])]
    fig, ax = plt.subplots(figsize=(5.4, 3.6))
    ax.semilogy(xs, ys, "o-", label="best valid bound")
    if oracle is not None:
        ax.semilogy(xs, [oracle(x) for x in xs], "k--", lw=1.0, label="exact")
    ax.set_xlabel("x")
    ax.set_ylabel("tail probability")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
