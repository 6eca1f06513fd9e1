"""Figure rendering: histograms and error curves in the benchmark's style."""

from __future__ import annotations

from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .data import (
    HIST_EDGES,
    curve,
    histogram_counts,
    load_rows,
    select_solvers,
    solver_order,
)

FIGURE_KINDS = ("histogram", "noise_curve", "lo_curve", "ortho_curve")

_CURVE_X = {
    "noise_curve": ("sigma", "image noise (px)"),
    "lo_curve": ("pt_lo", "points in LO"),
    "ortho_curve": ("deviation_deg", "deviation from orthogonal (deg)"),
}


@dataclass(frozen=True)
class FigureSpec:
    csv_path: str
    kind: str
    out_path: str
    solvers: tuple = ()

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; "
                             f"expected one of {FIGURE_KINDS}")


def _render_histogram(rows, solvers, out_path):
    fig, axes = plt.subplots(2, len(solvers), squeeze=False,
                             figsize=(3.2 * len(solvers), 5.0), sharex=True)
    centers = (HIST_EDGES[:-1] + HIST_EDGES[1:]) / 2.0
    for col, solver in enumerate(solvers):
        for row, field, label in ((0, "rot_err_deg", "rotation"),
                                  (1, "trans_err_deg", "translation")):
            counts = histogram_counts(rows, solver, field)
            ax = axes[row][col]
            ax.bar(centers, counts, width=HIST_EDGES[1] - HIST_EDGES[0])
            ax.set_title(f"{solver} {label}")
            ax.set_xlabel("log10 error (rad)")
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def _render_curves(rows, solvers, x_field, x_label, out_path):
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.6))
    for field, ax, title in (("rot_err_deg", axes[0], "rotation"),
                             ("trans_err_deg", axes[1], "translation")):
        for solver in solvers:
            xs, means = curve(rows, solver, x_field, field)
            ax.plot(xs, means, marker="o", label=solver)
        ax.set_xlabel(x_label)
        ax.set_ylabel("mean error (deg)")
        ax.set_title(title)
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def render(spec: FigureSpec) -> str:
    """Render one figure from a benchmark CSV; returns the output path."""
    rows = select_solvers(load_rows(spec.csv_path), spec.solvers or None)
    solvers = [s for s in solver_order(rows)
               if not spec.solvers or s in spec.solvers]
    if spec.kind == "histogram":
        _render_histogram(rows, solvers, spec.out_path)
    else:
        x_field, x_label = _CURVE_X[spec.kind]
        _render_curves(rows, solvers, x_field, x_label, spec.out_path)
    return spec.out_path
