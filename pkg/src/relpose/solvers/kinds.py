"""Solver configuration catalog and shared result/plumbing types."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..geometry import RelativePose, cross, triangulate_depths


class SolverKind(Enum):
    """The 13 minimal configurations, tagged with their X-Y-Z codes.

    X-Y-Z counts points, lines, and vanishing points in the sample; a
    trailing perp marks a line assumed orthogonal to the VP direction.
    """

    P5 = "5-0-0"
    P4H = "4-0-0"
    P3L1H = "3-1-0"
    P2L2H = "2-2-0"
    P1L3H = "1-3-0"
    L4H = "0-4-0"
    P2L3 = "2-3-0"
    P3V1 = "3-0-1"
    L3V1 = "0-3-1"
    P2V2 = "2-0-2"
    P2L1V1_PERP = "2-1-1⟂"
    P1L2V1_PERP = "1-2-1⟂"
    P2V1_PERP = "2-0-1⟂"

    @property
    def sample_size(self) -> tuple:
        """(points, lines, vps) drawn for one minimal sample."""
        return _SAMPLE_SIZES[self]

    @property
    def max_candidates(self) -> int:
        return _MAX_CANDIDATES[self]

    @property
    def uses_homography(self) -> bool:
        return self in (SolverKind.P4H, SolverKind.P3L1H, SolverKind.P2L2H,
                        SolverKind.P1L3H, SolverKind.L4H)

    @classmethod
    def parse(cls, text: str) -> "SolverKind":
        """Accept either the enum name (P5) or the X-Y-Z code (5-0-0).

        An ASCII 'p' suffix may replace the perp sign, e.g. '2-1-1p'.
        """
        t = text.strip()
        for kind in cls:
            if t.upper() == kind.name or t == kind.value:
                return kind
            if kind.value.endswith("⟂") and t.lower() == kind.value[:-1] + "p":
                return kind
        raise ValueError(f"unknown solver kind: {text!r}")


_SAMPLE_SIZES = {
    SolverKind.P5: (5, 0, 0),
    SolverKind.P4H: (4, 0, 0),
    SolverKind.P3L1H: (3, 1, 0),
    SolverKind.P2L2H: (2, 2, 0),
    SolverKind.P1L3H: (1, 3, 0),
    SolverKind.L4H: (0, 4, 0),
    SolverKind.P2L3: (2, 3, 0),
    SolverKind.P3V1: (3, 0, 1),
    SolverKind.L3V1: (0, 3, 1),
    SolverKind.P2V2: (2, 0, 2),
    SolverKind.P2L1V1_PERP: (2, 1, 1),
    SolverKind.P1L2V1_PERP: (1, 2, 1),
    SolverKind.P2V1_PERP: (2, 0, 1),
}

_MAX_CANDIDATES = {
    SolverKind.P5: 10,
    SolverKind.P4H: 4,
    SolverKind.P3L1H: 4,
    SolverKind.P2L2H: 4,
    SolverKind.P1L3H: 4,
    SolverKind.L4H: 4,
    SolverKind.P2L3: 10,
    SolverKind.P3V1: 8,
    SolverKind.L3V1: 8,
    SolverKind.P2V2: 4,
    SolverKind.P2L1V1_PERP: 4,
    SolverKind.P1L2V1_PERP: 4,
    SolverKind.P2V1_PERP: 4,
}


@dataclass(frozen=True, eq=False)
class SolverResult:
    """Candidate poses produced by one minimal solve."""

    candidates: list
    solver: SolverKind


def orient_translation(rotation, translation, point_matches) -> np.ndarray:
    """Flip the translation sign so the sample points triangulate in front.

    Votes over the sample's point matches; each pair with positive depth in
    both views supports the current sign, each pair behind both views
    supports the flip.  Ties keep the input sign.
    """
    votes = 0
    for m in point_matches:
        z1, z2 = triangulate_depths(rotation, translation, m.p, m.p_prime)
        if z1 > 0.0 and z2 > 0.0:
            votes += 1
        elif z1 < 0.0 and z2 < 0.0:
            votes -= 1
    return -translation if votes < 0 else translation


def epipolar_rows(rotation, point_matches) -> np.ndarray:
    """Coefficient rows a_i = (R p_i) x p'_i of the linear system A t = 0."""
    return np.array([cross(rotation @ m.p, m.p_prime) for m in point_matches])
