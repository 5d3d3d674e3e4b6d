"""Figure rendering for the CLI report paths.

Every report command writes a PNG next to its delimited output so a run
directory is inspectable without extra tooling.  Rendering is headless and
file-based only.
"""

from __future__ import annotations

import os
import tempfile

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .diagnostics import BANDS, SOURCES, EnergyCurve, MomentReport
from .search import SequentialSearchResult


def _atomic_savefig(fig, path: str) -> None:
    # render to a sibling temp file, then rename over the target
    dest_dir = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=dest_dir, suffix=".png.tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fig.savefig(fh, format="png", dpi=120)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    finally:
        plt.close(fig)


def plot_energy_curves(curve: EnergyCurve, path: str) -> None:
    """Renders one panel per subband with all four trajectory sources.

    Args:
        curve: populated energy table.
        path: destination PNG.
    """
    fig, axes = plt.subplots(2, 2, figsize=(9, 7), sharex=True)
    for ax, band in zip(axes.ravel(), BANDS):
        for source in SOURCES:
            t, e = curve.series(source, band)
            ax.plot(t, e, marker=".", markersize=3, linewidth=1, label=source)
        ax.set_title(band)
        ax.set_xlabel("t")
        ax.set_ylabel("subband energy")
    axes[0, 0].legend(fontsize=8)
    fig.tight_layout()
    _atomic_savefig(fig, path)


def plot_moment_report(reports: list[MomentReport], path: str) -> None:
    """Renders empirical vs predicted moments with 3-SE error bars.

    Args:
        reports: grid of verification rows, plotted in order.
        path: destination PNG.
    """
    idx = np.arange(len(reports))
    fig, (ax_m, ax_v) = plt.subplots(1, 2, figsize=(10, 4))
    ax_m.errorbar(
        idx,
        [r.emp_mean for r in reports],
        yerr=[3.0 * r.mean_stderr for r in reports],
        fmt="o",
        markersize=4,
        capsize=3,
        label="empirical",
    )
    ax_m.plot(idx, [r.pred_mean for r in reports], "x", color="k", label="predicted")
    ax_m.set_title("mean coefficient")
    ax_v.errorbar(
        idx,
        [r.emp_var for r in reports],
        yerr=[3.0 * r.var_stderr for r in reports],
        fmt="o",
        markersize=4,
        capsize=3,
        label="empirical",
    )
    ax_v.plot(idx, [r.pred_var for r in reports], "x", color="k", label="predicted")
    ax_v.set_title("variance")
    for ax in (ax_m, ax_v):
        ax.set_xlabel("grid point")
        ax.legend(fontsize=8)
    fig.tight_layout()
    _atomic_savefig(fig, path)


def plot_search_trace(result: SequentialSearchResult, path: str) -> None:
    """Renders objective-vs-weight traces for both search stages.

    Args:
        result: sequential search outcome with full traces.
        path: destination PNG.
    """
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for ax, stage_res, label in (
        (axes[0], result.stage1, "w_l"),
        (axes[1], result.stage2, "w_h"),
    ):
        for stage, marker in (("coarse", "o"), ("fine", ".")):
            pts = [(w, v) for s, w, v in stage_res.points if s == stage]
            if pts:
                ws, vs = zip(*pts)
                ax.plot(ws, vs, marker, markersize=5 if marker == "o" else 3, label=stage)
        ax.axvline(stage_res.best_w, color="k", linewidth=0.8, linestyle="--")
        ax.set_xlabel(label)
        ax.set_ylabel("objective")
        ax.legend(fontsize=8)
    axes[0].set_title(f"stage 1: w_l* = {result.w_l:g}")
    axes[1].set_title(f"stage 2: w_h* = {result.w_h:g}")
    fig.tight_layout()
    _atomic_savefig(fig, path)
