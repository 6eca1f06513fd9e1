"""Rendering of the shipped example CSVs and aggregation consistency."""

import csv
import math
from pathlib import Path

import numpy as np
import pytest

from relpose_plots import (
    EmptySelection,
    FigureSpec,
    HIST_EDGES,
    MissingColumn,
    histogram_counts,
    load_rows,
    render,
)

EXAMPLES = Path(__file__).resolve().parent.parent / "examples"

KIND_TO_CSV = {
    "histogram": "stability.csv",
    "noise_curve": "noise.csv",
    "lo_curve": "lo.csv",
    "ortho_curve": "ortho.csv",
}


@pytest.mark.parametrize("kind", sorted(KIND_TO_CSV))
def test_renders_all_figure_kinds(kind, tmp_path):
    out = tmp_path / f"{kind}.png"
    got = render(FigureSpec(str(EXAMPLES / KIND_TO_CSV[kind]), kind, str(out)))
    assert got == str(out)
    assert out.exists() and out.stat().st_size > 0


def test_histogram_counts_match_independent_aggregation():
    path = EXAMPLES / "stability.csv"
    rows = load_rows(str(path))
    # independent aggregation straight from the CSV text
    by_solver = {}
    with open(path, newline="") as f:
        for raw in csv.DictReader(f):
            by_solver.setdefault(raw["solver"], []).append(float(raw["rot_err_deg"]))
    for solver, errs in by_solver.items():
        expected = np.zeros(len(HIST_EDGES) - 1, dtype=int)
        for e in errs:
            rad = max(math.radians(e), 10.0 ** HIST_EDGES[0])
            log = min(max(math.log10(rad), HIST_EDGES[0]), HIST_EDGES[-1] - 1e-9)
            expected[int((log - HIST_EDGES[0]) / 0.25)] += 1
        got = histogram_counts(rows, solver)
        assert np.array_equal(got, expected), solver
        assert got.sum() == len(errs)


def test_solver_filter(tmp_path):
    out = tmp_path / "h.png"
    render(FigureSpec(str(EXAMPLES / "stability.csv"), "histogram", str(out),
                      solvers=("5-0-0",)))
    assert out.exists()


def test_empty_selection_error(tmp_path):
    with pytest.raises(EmptySelection):
        render(FigureSpec(str(EXAMPLES / "stability.csv"), "histogram",
                          str(tmp_path / "x.png"), solvers=("9-9-9",)))


def test_missing_column_named(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("experiment,solver,sigma\nstability,5-0-0,0.0\n")
    with pytest.raises(MissingColumn) as err:
        load_rows(str(bad))
    assert "lines_per_vp" in str(err.value)


def test_noise_curve_x_axis_matches_csv_sigmas(tmp_path):
    rows = load_rows(str(EXAMPLES / "noise.csv"))
    from relpose_plots import curve
    xs, _ = curve(rows, "3-0-1", "sigma", "rot_err_deg")
    assert list(xs) == sorted({r["sigma"] for r in rows if r["solver"] == "3-0-1"})


def test_unknown_kind_rejected(tmp_path):
    with pytest.raises(ValueError):
        FigureSpec(str(EXAMPLES / "stability.csv"), "pie", str(tmp_path / "x.png"))


def test_render_does_not_modify_csv(tmp_path):
    path = EXAMPLES / "stability.csv"
    before = path.read_bytes()
    render(FigureSpec(str(path), "histogram", str(tmp_path / "h.png")))
    assert path.read_bytes() == before
