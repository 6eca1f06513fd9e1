"""Minimal solvers whose rotation comes from vanishing point constraints."""

from __future__ import annotations

import numpy as np

from ..exceptions import CoincidentPoints, NoRealRoot, ParallelVPs, RankDeficientA
from ..geometry import (
    LineMatch,
    PointMatch,
    RelativePose,
    VPMatch,
    cross,
    line_line_junction,
    rotation_about_y,
    unit,
)
from .kinds import SolverKind, SolverResult, epipolar_rows, orient_translation
from .upright import UprightProblem, solve_upright_3pt

# A wrong relative-sign branch maps a frame whose Gram matrix differs by
# 2 |v1 . v2|, while VP noise perturbs the correct branch by only the
# (frame-conditioning-amplified) angular error.  Branches are therefore
# gated adaptively: within a factor of the best branch's deviation, floored
# at an absolute tolerance so exact data admits only exact branches.
ROTATION_CONSISTENCY_TOL = 1e-6
ROTATION_CONSISTENCY_FACTOR = 3.0
RANK_TOL = 1e-12
_VP_PARALLEL_TOL = 1e-9


def _project_so3(m):
    u, _, vt = np.linalg.svd(m)
    r = u @ vt
    if np.linalg.det(r) < 0.0:
        r = u @ np.diag([1.0, 1.0, -1.0]) @ vt
    return r


def solve_3_0_1(points, vp: VPMatch) -> SolverResult:
    """Pose from three point matches and one VP match.

    The VP aligns one rotation axis with the y-axis of both views; the
    remaining yaw and the translation come from the upright 3-point solver.
    Both branches of v' = +/- R v are explored unless a sign hint fixes one.
    """
    rel = vp.relative_sign()
    signs = (rel,) if rel is not None else (1.0, -1.0)
    candidates = []
    for sign in signs:
        problem = UprightProblem.from_points(points, vp.v, sign * vp.v_prime)
        try:
            solutions = solve_upright_3pt(problem)
        except NoRealRoot:
            continue
        r_xp_t = problem.r_x_prime.T
        for phi, t_local in solutions:
            rotation = r_xp_t @ rotation_about_y(phi) @ problem.r_x
            translation = orient_translation(rotation, r_xp_t @ t_local, points)
            candidates.append(RelativePose(rotation, translation))
    if not candidates:
        raise NoRealRoot("no sign branch of the VP constraint admits a real pose")
    return SolverResult(candidates, SolverKind.P3V1)


def solve_0_3_1(lines, vp: VPMatch) -> SolverResult:
    """Pose from three coplanar line matches and one VP match.

    The pairwise junctions (1,2), (1,3), (2,3) act as point matches; the rest
    is the 3-0-1 solve.
    """
    junctions = [line_line_junction(lines[i], lines[j])
                 for i, j in ((0, 1), (0, 2), (1, 2))]
    result = solve_3_0_1(junctions, vp)
    return SolverResult(result.candidates, SolverKind.L3V1)


def solve_2_0_2(points, vps) -> SolverResult:
    """Pose from two point matches and two VP matches.

    Each of the four sign systems of v' = +/- R v gives a rotation
    R = [x' y' x'xy'] [x y xxy]^-1; rotations failing the orthonormality
    check are discarded.  The translation is the nullspace of the 2x3
    epipolar coefficient matrix, oriented by the two sample points.
    """
    vp1, vp2 = vps
    if (np.linalg.norm(cross(vp1.v, vp2.v)) < _VP_PARALLEL_TOL
            or np.linalg.norm(cross(vp1.v_prime, vp2.v_prime)) < _VP_PARALLEL_TOL):
        raise ParallelVPs("the two VP directions coincide")

    base = np.column_stack([vp1.v, vp2.v, cross(vp1.v, vp2.v)])
    base_inv = np.linalg.inv(base)

    rel1, rel2 = vp1.relative_sign(), vp2.relative_sign()
    signs1 = (rel1,) if rel1 is not None else (1.0, -1.0)
    signs2 = (rel2,) if rel2 is not None else (1.0, -1.0)

    branches = []
    for s1 in signs1:
        for s2 in signs2:
            xp = s1 * vp1.v_prime
            yp = s2 * vp2.v_prime
            rotation = np.column_stack([xp, yp, cross(xp, yp)]) @ base_inv
            deviation = np.abs(rotation.T @ rotation - np.eye(3)).max()
            if np.linalg.det(rotation) < 0.0:
                continue
            branches.append((deviation, rotation))
    candidates = []
    rank_failures = 0
    if branches:
        gate = max(ROTATION_CONSISTENCY_TOL,
                   ROTATION_CONSISTENCY_FACTOR * min(d for d, _ in branches))
        for deviation, rotation in branches:
            if deviation > gate:
                continue
            rotation = _project_so3(rotation)
            a = epipolar_rows(rotation, points)
            _, s, vt = np.linalg.svd(a)
            if s[0] < RANK_TOL:
                rank_failures += 1
                continue
            translation = orient_translation(rotation, vt[2], points)
            candidates.append(RelativePose(rotation, translation))
    if not candidates and rank_failures:
        raise RankDeficientA("translation system vanished for every rotation branch")
    return SolverResult(candidates, SolverKind.P2V2)


def solve_2_1_1_perp(points, line: LineMatch, vp: VPMatch) -> SolverResult:
    """Pose from two points, one VP, and one line orthogonal to the VP.

    The orthogonal line supplies a second VP as v2 = l x v1 in each image,
    reducing the problem to the 2-0-2 configuration.
    """
    w = cross(line.l, vp.v)
    w_prime = cross(line.l_prime, vp.v_prime)
    if (np.linalg.norm(w) < _VP_PARALLEL_TOL
            or np.linalg.norm(w_prime) < _VP_PARALLEL_TOL):
        raise ParallelVPs("line and VP are parallel: the derived VP collapses")
    vp2 = VPMatch(unit(w), unit(w_prime))
    result = solve_2_0_2(points, (vp, vp2))
    return SolverResult(result.candidates, SolverKind.P2L1V1_PERP)


def solve_1_2_1_perp(point: PointMatch, lines, vp: VPMatch) -> SolverResult:
    """Pose from one point, two intersecting lines (the first orthogonal to
    the VP), and one VP.  The junction of the lines is the second point."""
    p2 = line_line_junction(lines[0], lines[1])
    result = solve_2_1_1_perp((point, p2), lines[0], vp)
    return SolverResult(result.candidates, SolverKind.P1L2V1_PERP)


def solve_2_0_1_perp(points, vp: VPMatch) -> SolverResult:
    """Pose from two points whose joining line is orthogonal to the VP."""
    p1, p2 = points
    if (np.linalg.norm(p1.p - p2.p) < 1e-9
            or np.linalg.norm(p1.p_prime - p2.p_prime) < 1e-9):
        raise CoincidentPoints("the two points coincide; no line through them")
    line = LineMatch.from_endpoints(p1.p, p2.p, p1.p_prime, p2.p_prime)
    result = solve_2_1_1_perp(points, line, vp)
    return SolverResult(result.candidates, SolverKind.P2V1_PERP)


def solve_2_3_0(points, lines) -> SolverResult:
    """Pose from two points and three coplanar lines via the 5-point solver.

    The three pairwise junctions of the lines are prepended to the two points
    to assemble the 5-point sample.
    """
    from .fivepoint import solve_5pc
    junctions = [line_line_junction(lines[i], lines[j])
                 for i, j in ((0, 1), (0, 2), (1, 2))]
    result = solve_5pc(junctions + list(points))
    return SolverResult(result.candidates, SolverKind.P2L3)
