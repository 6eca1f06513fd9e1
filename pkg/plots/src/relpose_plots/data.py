"""Benchmark CSV loading and aggregation.

The CSV schema is one row per measurement:
experiment, solver, sigma, lines_per_vp, pt_lo, deviation_deg,
rot_err_deg, trans_err_deg, instance_id.
"""

from __future__ import annotations

import csv

import numpy as np

REQUIRED_COLUMNS = ("experiment", "solver", "sigma", "lines_per_vp", "pt_lo",
                    "deviation_deg", "rot_err_deg", "trans_err_deg",
                    "instance_id")

# Histogram bin spec shared with the benchmark suite: 0.25-wide log10 bins
# over [-16, 2] radians.
HIST_LO = -16.0
HIST_HI = 2.0
HIST_WIDTH = 0.25
HIST_EDGES = np.arange(HIST_LO, HIST_HI + HIST_WIDTH / 2, HIST_WIDTH)


class MissingColumn(ValueError):
    def __init__(self, column):
        super().__init__(f"CSV is missing required column {column!r}")
        self.column = column


class EmptySelection(ValueError):
    pass


def load_rows(path) -> list:
    """Rows as dicts with numeric fields parsed; validates the schema."""
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        for column in REQUIRED_COLUMNS:
            if column not in header:
                raise MissingColumn(column)
        rows = []
        for raw in reader:
            rows.append({
                "experiment": raw["experiment"],
                "solver": raw["solver"],
                "sigma": float(raw["sigma"]),
                "lines_per_vp": int(raw["lines_per_vp"]),
                "pt_lo": int(raw["pt_lo"]),
                "deviation_deg": float(raw["deviation_deg"]),
                "rot_err_deg": float(raw["rot_err_deg"]),
                "trans_err_deg": float(raw["trans_err_deg"]),
                "instance_id": int(raw["instance_id"]),
            })
    return rows


def select_solvers(rows, solvers=None) -> list:
    if not solvers:
        out = list(rows)
    else:
        wanted = set(solvers)
        out = [r for r in rows if r["solver"] in wanted]
    if not out:
        raise EmptySelection(
            "no rows left after solver selection: " + ",".join(solvers or ()))
    return out


def solver_order(rows) -> list:
    seen = []
    for r in rows:
        if r["solver"] not in seen:
            seen.append(r["solver"])
    return seen


def log10_radians(err_deg) -> np.ndarray:
    rad = np.radians(np.asarray(err_deg, dtype=float))
    return np.log10(np.clip(rad, 10.0 ** HIST_LO, None))


def histogram_counts(rows, solver, field="rot_err_deg") -> np.ndarray:
    """Bin counts of log10 errors (radians) for one solver.

    Values are clipped into the bin range so every row is counted exactly
    once; the renderer uses this same aggregation.
    """
    errs = [r[field] for r in rows if r["solver"] == solver]
    logs = np.clip(log10_radians(errs), HIST_LO, HIST_HI - 1e-12)
    counts, _ = np.histogram(logs, bins=HIST_EDGES)
    return counts


def curve(rows, solver, x_field, y_field) -> tuple:
    """Sorted distinct x values and the mean of y at each, for one solver."""
    xs = sorted({r[x_field] for r in rows if r["solver"] == solver})
    means = []
    for x in xs:
        ys = [r[y_field] for r in rows
              if r["solver"] == solver and r[x_field] == x]
        means.append(float(np.mean(ys)))
    return np.array(xs, dtype=float), np.array(means)
