"""Figure builders.

Decay plots show the tracked deviation and the center-component displacement
on a log scale with two slope guides: the least-squares slope of the plotted
curve (annotated on the figure) and, when a rate-fit file is supplied, the
spectral-gap reference slope.  Spectrum plots scatter the real parts by block
and ring the null eigenvalues.  Output is SVG by default and byte-stable for
fixed inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .io import PlotDataError, read_decay_csv, read_ratefit_json, read_spectrum_csv  # noqa: E402

FIT_WINDOW = (1e-6, 1e-3)

_RC = {
    "svg.hashsalt": "torusflow-plots",
    "figure.figsize": (6.0, 3.8),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


@dataclass(frozen=True)
class PlotJob:
    """One rendering task."""

    kind: str                 # decay | spectrum
    csv_path: str
    out_path: str
    fit_path: str | None = None

    def __post_init__(self):
        if self.kind not in ("decay", "spectrum"):
            raise PlotDataError(f"unknown plot kind {self.kind!r}")


def _fit_slope(tau: np.ndarray, dev: np.ndarray) -> tuple[float, np.ndarray]:
    """Least-squares decay rate of the curve over the standard window (all
    positive samples when the window is too thin)."""
    pos = dev > 0
    mask = pos & (dev >= FIT_WINDOW[0]) & (dev <= FIT_WINDOW[1])
    if mask.sum() < 3:
        mask = pos
    if mask.sum() < 2:
        raise PlotDataError("decay curve has fewer than two positive samples")
    slope, icept = np.polyfit(tau[mask], np.log(dev[mask]), 1)
    return -float(slope), mask


def render_decay(csv_path: str | Path, out_path: str | Path,
                 fit_path: str | Path | None = None) -> dict:
    data = read_decay_csv(csv_path)
    tau, total, null_part = data["tau"], data["dev_total"], data["dev_h_null"]
    rate, mask = _fit_slope(tau, total)
    fit_doc = read_ratefit_json(fit_path) if fit_path else {}
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        ax.semilogy(tau, np.where(total > 0, total, np.nan), color="#1f4e79",
                    lw=1.6, label="tracked deviation")
        ax.semilogy(tau, np.where(null_part > 0, null_part, np.nan), color="#b55a00",
                    lw=1.2, ls="--", label="center displacement")
        t_ref = tau[mask]
        anchor = total[mask][0]
        ax.semilogy(t_ref, anchor * np.exp(-rate * (t_ref - t_ref[0])), color="#444444",
                    lw=0.9, ls=":", label=f"fitted slope {rate:.2f}")
        gap = fit_doc.get("gap")
        if gap is not None:
            ax.semilogy(t_ref, anchor * np.exp(-float(gap) * (t_ref - t_ref[0])),
                        color="#2e7d32", lw=0.9, ls="-.",
                        label=f"spectral gap {float(gap):.2f}")
        ax.annotate(f"fitted rate = {rate:.2f}", xy=(0.035, 0.06),
                    xycoords="axes fraction", fontsize=9, color="#222222")
        ax.set_xlabel("tau")
        ax.set_ylabel("deviation (max norm)")
        ax.legend(loc="upper right", fontsize=8)
        fig.tight_layout()
        fig.savefig(out_path, metadata={"Date": None})
        plt.close(fig)
    return {"kind": "decay", "fitted_rate": rate, "n_samples": int(tau.size),
            "gap": gap}


def render_spectrum(csv_path: str | Path, out_path: str | Path) -> dict:
    data = read_spectrum_csv(csv_path)
    blocks = [str(b) for b in dict.fromkeys(data["block"])]  # stable order of appearance
    colors = {"L0": "#1f4e79", "L1": "#2e7d32", "L2": "#b55a00", "full": "#6a1b9a"}
    n_null = int(data["is_null"].sum())
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for pos, block in enumerate(blocks):
            sel = data["block"] == block
            re = data["re"][sel]
            jitter = np.linspace(-0.18, 0.18, re.size) if re.size > 1 else np.zeros(1)
            ax.scatter(pos + jitter, re, s=9, color=colors.get(block, "#555555"),
                       label=block, alpha=0.85, linewidths=0)
            null_sel = sel & (data["is_null"] == 1)
            if null_sel.any():
                order = np.where(sel)[0]
                null_j = np.isin(order, np.where(null_sel)[0])
                ax.scatter(pos + jitter[null_j], data["re"][null_sel], s=70,
                           facecolors="none", edgecolors="#c62828", linewidths=1.2,
                           label=None, zorder=3)
        ax.axhline(0.0, color="#999999", lw=0.7)
        ax.set_xticks(range(len(blocks)), blocks)
        ax.set_ylabel("Re(eigenvalue)")
        ax.set_yscale("symlog", linthresh=1.0)
        ax.annotate(f"{n_null} null", xy=(0.03, 0.05), xycoords="axes fraction",
                    fontsize=9, color="#c62828")
        ax.legend(loc="lower right", fontsize=8)
        fig.tight_layout()
        fig.savefig(out_path, metadata={"Date": None})
        plt.close(fig)
    return {"kind": "spectrum", "n_null": n_null, "blocks": blocks,
            "n_eigenvalues": int(data["re"].size)}


def render(job: PlotJob) -> dict:
    """Render one job; returns a summary of what was drawn."""
    if job.kind == "decay":
        return render_decay(job.csv_path, job.out_path, job.fit_path)
    return render_spectrum(job.csv_path, job.out_path)
