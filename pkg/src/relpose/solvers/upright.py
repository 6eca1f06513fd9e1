"""Relative pose with rotation restricted to the y-axis, from 3 point pairs.

After aligning a matched direction with the y-axis in both views, the
epipolar system q'_i^T [t']x R_y(phi) q_i = 0 reduces, via the half-angle
substitution s = tan(phi/2), to a univariate quartic: the determinant of the
3x3 coefficient matrix is a degree-6 polynomial in s that always carries the
real-root-free factor (1 + s^2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import NoRealRoot
from ..geometry import cross, rotation_about_y, rotation_to_axis

IMAG_ROOT_TOL = 1e-10

# (1 + s^2) R_y(phi(s)) = B0 + B1 s + B2 s^2 under cos = (1-s^2)/(1+s^2),
# sin = 2s/(1+s^2).
_B1 = np.array([
    [0.0, 0.0, -2.0],
    [0.0, 0.0, 0.0],
    [2.0, 0.0, 0.0],
])
_B2 = np.diag([-1.0, 1.0, -1.0])


@dataclass(frozen=True, eq=False)
class UprightProblem:
    """Point pairs rotated so the constrained axis is the y-axis."""

    q: np.ndarray          # (3, 3) rows q_i = R_x p_i
    q_prime: np.ndarray    # (3, 3) rows q'_i = R'_x p'_i
    r_x: np.ndarray
    r_x_prime: np.ndarray

    @classmethod
    def from_points(cls, point_matches, x, x_prime) -> "UprightProblem":
        """Align x, x' with the y-axis and rotate the three point pairs."""
        r_x = rotation_to_axis(x)
        r_xp = rotation_to_axis(x_prime)
        q = np.array([r_x @ m.p for m in point_matches])
        qp = np.array([r_xp @ m.p_prime for m in point_matches])
        return cls(q, qp, r_x, r_xp)


def _poly_eval(coeffs, s):
    acc = 0.0
    for c in coeffs:
        acc = acc * s + c
    return acc


def solve_upright_3pt(problem: UprightProblem) -> list:
    """All (phi, t') with q'_i^T [t']x R_y(phi) q_i = 0 for i = 1..3.

    Returns at most 4 solutions with unit t'; the sign of t' is whatever the
    nullspace computation yields (orientation is the caller's concern).
    Raises NoRealRoot when the quartic has no acceptably real root.
    """
    q, qp = problem.q, problem.q_prime
    # Row polynomials c_i(s) = ((1+s^2) R_y q_i) x q'_i, quadratic in s.
    c0 = [cross(q[i], qp[i]) for i in range(3)]
    c1 = [cross(_B1 @ q[i], qp[i]) for i in range(3)]
    c2 = [cross(_B2 @ q[i], qp[i]) for i in range(3)]

    # row_2(s) x row_3(s): vector polynomial of degree 4.
    r2 = (c0[1], c1[1], c2[1])
    r3 = (c0[2], c1[2], c2[2])
    cr = [np.zeros(3) for _ in range(5)]
    for a in range(3):
        for b in range(3):
            cr[a + b] += cross(r2[a], r3[b])

    # Dot with row_1(s): degree-6 scalar polynomial, ascending coefficients.
    r1 = (c0[0], c1[0], c2[0])
    poly = np.zeros(7)
    for a in range(3):
        for b in range(5):
            poly[a + b] += r1[a] @ cr[b]

    # Exact division by (s^2 + 1); the remainder is numerical noise.
    a6, a5, a4, a3, a2, a1, a0 = poly[::-1]
    q4 = a6
    q3 = a5
    q2 = a4 - q4
    q1 = a3 - q3
    q0 = a2 - q2
    quartic = np.array([q4, q3, q2, q1, q0])

    scale = np.abs(quartic).max()
    if scale == 0.0:
        raise NoRealRoot("degenerate upright system: identically zero determinant")
    lead = np.nonzero(np.abs(quartic) > 1e-14 * scale)[0]
    roots = np.roots(quartic[lead[0]:])

    dquartic = quartic[:4] * np.array([4.0, 3.0, 2.0, 1.0])
    solutions = []
    for r in roots:
        if abs(r.imag) > IMAG_ROOT_TOL * max(1.0, abs(r.real)):
            continue
        s = r.real
        # One Newton polish on the quartic tightens the root to full precision.
        d = _poly_eval(dquartic, s)
        if d != 0.0:
            step = _poly_eval(quartic, s) / d
            if abs(step) < 1e-3 * max(1.0, abs(s)):
                s -= step
        phi = 2.0 * np.arctan(s)
        ry = rotation_about_y(phi)
        m = np.array([cross(ry @ q[i], qp[i]) for i in range(3)])
        _, _, vt = np.linalg.svd(m)
        solutions.append((float(phi), vt[2]))

    if not solutions:
        raise NoRealRoot("upright quartic has no real roots")
    return solutions
