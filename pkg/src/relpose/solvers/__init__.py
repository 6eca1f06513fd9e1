"""Minimal solvers for the 13 point/line/VP configurations."""

from __future__ import annotations

from .fivepoint import decompose_essential, essential_candidates, solve_5pc
from .homography import (
    decompose_homography,
    estimate_homography,
    solve_homography_family,
)
from .kinds import SolverKind, SolverResult, orient_translation
from .upright import UprightProblem, solve_upright_3pt
from .vp_based import (
    solve_0_3_1,
    solve_1_2_1_perp,
    solve_2_0_1_perp,
    solve_2_0_2,
    solve_2_1_1_perp,
    solve_2_3_0,
    solve_3_0_1,
)

__all__ = [
    "SolverKind",
    "SolverResult",
    "UprightProblem",
    "decompose_essential",
    "decompose_homography",
    "essential_candidates",
    "estimate_homography",
    "orient_translation",
    "solve",
    "solve_0_3_1",
    "solve_1_2_1_perp",
    "solve_2_0_1_perp",
    "solve_2_0_2",
    "solve_2_1_1_perp",
    "solve_2_3_0",
    "solve_3_0_1",
    "solve_5pc",
    "solve_homography_family",
    "solve_upright_3pt",
]


def solve(kind: SolverKind, points=(), lines=(), vps=()) -> SolverResult:
    """Run the solver for ``kind`` on a minimal sample.

    ``points``, ``lines``, ``vps`` must match the kind's sample sizes; the
    ordering conventions are those of the individual solver functions.
    """
    points, lines, vps = list(points), list(lines), list(vps)
    expected = kind.sample_size
    got = (len(points), len(lines), len(vps))
    if got != expected:
        raise ValueError(f"{kind.value} expects sample sizes {expected}, got {got}")
    if kind is SolverKind.P5:
        return solve_5pc(points)
    if kind.uses_homography:
        return solve_homography_family(points, lines)
    if kind is SolverKind.P2L3:
        return solve_2_3_0(points, lines)
    if kind is SolverKind.P3V1:
        return solve_3_0_1(points, vps[0])
    if kind is SolverKind.L3V1:
        return solve_0_3_1(lines, vps[0])
    if kind is SolverKind.P2V2:
        return solve_2_0_2(points, vps)
    if kind is SolverKind.P2L1V1_PERP:
        return solve_2_1_1_perp(points, lines[0], vps[0])
    if kind is SolverKind.P1L2V1_PERP:
        return solve_1_2_1_perp(points[0], lines, vps[0])
    if kind is SolverKind.P2V1_PERP:
        return solve_2_0_1_perp(points, vps[0])
    raise ValueError(f"unhandled solver kind {kind}")
