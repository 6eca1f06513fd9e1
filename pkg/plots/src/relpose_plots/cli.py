"""Command line: plots <kind> --csv <path> --out <path> [--solvers a,b,c]."""

from __future__ import annotations

import argparse
import sys

from .data import EmptySelection, MissingColumn
from .render import FIGURE_KINDS, FigureSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plots", description="Render relpose benchmark CSVs as figures")
    parser.add_argument("kind", choices=FIGURE_KINDS)
    parser.add_argument("--csv", required=True, help="input benchmark CSV")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--solvers", default="",
                        help="comma-separated solver tags to include")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    solvers = tuple(s for s in args.solvers.split(",") if s)
    try:
        render(FigureSpec(args.csv, args.kind, args.out, solvers))
    except (MissingColumn, EmptySelection, OSError, ValueError) as exc:
        print(f"plots: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
