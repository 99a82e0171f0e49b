"""Static SVG renderings of the sweep plot data (byte-stable: no dates, fixed hash salt)."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "ranslice"
_META = {"Date": None, "Creator": "ranslice"}
_CLASS_COLORS = {"URLLC": "tab:red", "eMBB": "tab:blue", "mMTC": "tab:green"}


def _save(fig, path: Path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)


def _series(rows, solver, key="mean", err="ci_halfwidth"):
    pts = [(r["slice_count"], r[key], r[err]) for r in rows if r["solver"] == solver]
    xs, ys, es = zip(*pts) if pts else ((), (), ())
    return xs, ys, [0.0 if math.isnan(e) else e for e in es]


def _util_figure(rows, ylabel, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for solver in sorted({r["solver"] for r in rows}):
        xs, ys, es = _series(rows, solver)
        ax.errorbar(xs, ys, yerr=es, marker="o", capsize=3, label=solver)
    ax.set_xlabel("number of slices")
    ax.set_ylabel(ylabel)
    ax.legend()
    _save(fig, path)


def _delay_figure(rows, title, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for cls, color in _CLASS_COLORS.items():
        sub = [r for r in rows if r["class"] == cls]
        xs = [r["slice_count"] for r in sub]
        ys = [r["mean_ms"] for r in sub]
        es = [0.0 if math.isnan(r["ci_halfwidth_ms"]) else r["ci_halfwidth_ms"] for r in sub]
        ax.errorbar(xs, ys, yerr=es, marker="o", capsize=3, color=color, label=cls)
        if sub:
            ax.axhline(sub[0]["budget_ms"], color=color, linestyle="--", linewidth=0.8)
    ax.set_yscale("log")
    ax.set_xlabel("number of slices")
    ax.set_ylabel("mean delay (ms)")
    ax.set_title(title)
    ax.legend()
    _save(fig, path)


def _tier_figure(rows, path):
    solvers = sorted({r["solver"] for r in rows})
    fig, axes = plt.subplots(1, len(solvers), figsize=(5 * len(solvers), 3.5), squeeze=False)
    for ax, solver in zip(axes[0], solvers):
        for tier in sorted({r["tier"] for r in rows}):
            sub = [r for r in rows if r["solver"] == solver and r["tier"] == tier]
            ax.plot([r["slice_count"] for r in sub], [r["cu_mean"] for r in sub], marker="o", label=f"tier {tier}")
        ax.set_title(f"CU placement by tier ({solver})")
        ax.set_xlabel("number of slices")
        ax.set_ylabel("mean CUs hosted")
        ax.legend()
    _save(fig, path)


def render_figures(out: Path, fig4, fig5, delay, fig8):
    _util_figure(fig4, "avg server utilization", out / "fig4_server_utilization.svg")
    _util_figure(fig5, "avg link utilization", out / "fig5_link_utilization.svg")
    names = {"heuristic": "fig6_delay_heuristic.svg", "exact": "fig7_delay_exact.svg"}
    for solver, rows in delay.items():
        _delay_figure(rows, solver, out / names[solver])
    _tier_figure(fig8, out / "fig8_tier_occupancy.svg")
