"""Offline rendering of relpose benchmark CSVs into paper-style figures."""

from .data import (
    EmptySelection,
    HIST_EDGES,
    MissingColumn,
    curve,
    histogram_counts,
    load_rows,
)
from .render import FIGURE_KINDS, FigureSpec, render

__all__ = [
    "EmptySelection",
    "FIGURE_KINDS",
    "FigureSpec",
    "HIST_EDGES",
    "MissingColumn",
    "curve",
    "histogram_counts",
    "load_rows",
    "render",
]
