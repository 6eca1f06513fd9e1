"""Homography from four coplanar points/lines and its pose decomposition."""

from __future__ import annotations

import numpy as np

from ..exceptions import DegenerateSample, NearParallel
from ..geometry import (
    RelativePose,
    cross,
    line_line_junction,
    skew,
    triangulate_depths,
)
from .kinds import SolverKind, SolverResult

RANK_RATIO_TOL = 1e-9
_PURE_ROTATION_TOL = 1e-9
_PURE_ROTATION_T = np.array([1.0, 0.0, 0.0])

_FAMILY_KINDS = {
    (4, 0): SolverKind.P4H,
    (3, 1): SolverKind.P3L1H,
    (2, 2): SolverKind.P2L2H,
    (1, 3): SolverKind.P1L3H,
    (0, 4): SolverKind.L4H,
}


def _project_so3(m):
    u, _, vt = np.linalg.svd(m)
    r = u @ vt
    if np.linalg.det(r) < 0.0:
        r = u @ np.diag([1.0, 1.0, -1.0]) @ vt
    return r


def estimate_homography(points, lines) -> np.ndarray:
    """DLT over mixed point rows p' x (H p) = 0 and line rows l x (H^T l') = 0."""
    rows = []
    for m in points:
        sp = skew(m.p_prime)
        for k in range(3):
            rows.append(np.kron(sp[k], m.p))
    for lm in lines:
        sl = skew(lm.l)
        for k in range(3):
            rows.append(np.kron(lm.l_prime, sl[k]))
    design = np.array(rows)
    _, sv, vt = np.linalg.svd(design)
    if sv[7] < RANK_RATIO_TOL * sv[0]:
        raise DegenerateSample("homography design matrix has rank below 8")
    return vt[8].reshape(3, 3)


def _sign_test_pairs(points, lines):
    """Point pairs anchoring the projective sign of H.

    Only physically visible entities carry absolute depth information: the
    sample's points and the segment endpoints.  (Junctions do not; both sign
    branches reproduce a junction's depth ratio exactly, so junction votes
    are vacuous.)  Segment endpoints sit on plane points seen in both views,
    so H maps each to a positive-depth image even though endpoints are not
    exact point correspondences.
    """
    pairs = [(m.p, m.p_prime) for m in points]
    for lm in lines:
        pairs.append((lm.a, lm.a_prime))
        pairs.append((lm.b, lm.b_prime))
    return pairs


def _decompose_unit_sign(m) -> list:
    """Candidates of one sign choice of a sigma2-normalized homography."""
    sv = np.linalg.svd(m, compute_uv=False)
    s1, s3 = sv[0], sv[2]
    if s1 - s3 < _PURE_ROTATION_TOL * s1:
        if np.linalg.det(m) < 0.0:
            m = -m
        return [RelativePose(_project_so3(m), _PURE_ROTATION_T, pure_rotation=True)]

    w, v = np.linalg.eigh(m.T @ m)  # ascending eigenvalues
    if np.linalg.det(v) < 0.0:
        v = -v
    v1, v2, v3 = v[:, 2], v[:, 1], v[:, 0]
    sq1 = np.sqrt(max(w[2], 1.0))
    sq3 = np.sqrt(max(min(w[0], 1.0), 0.0))
    denom = np.sqrt(max(sq1 ** 2 - sq3 ** 2, 1e-300))
    ca = np.sqrt(max(1.0 - sq3 ** 2, 0.0)) / denom
    cb = np.sqrt(max(sq1 ** 2 - 1.0, 0.0)) / denom

    candidates = []
    for u_vec in (ca * v1 + cb * v3, ca * v1 - cb * v3):
        u_frame = np.column_stack([v2, u_vec, cross(v2, u_vec)])
        mv2, mu = m @ v2, m @ u_vec
        w_frame = np.column_stack([mv2, mu, cross(mv2, mu)])
        rotation = _project_so3(w_frame @ u_frame.T)
        t = (m - rotation) @ cross(v2, u_vec)
        norm_t = np.linalg.norm(t)
        if norm_t < _PURE_ROTATION_TOL:
            candidates.append(
                RelativePose(rotation, _PURE_ROTATION_T, pure_rotation=True))
            continue
        t = t / norm_t
        candidates.append(RelativePose(rotation, t))
        candidates.append(RelativePose(rotation, -t))
    return candidates


def decompose_homography(h_matrix, sign_pairs) -> list:
    """All (R, t) candidates of a calibrated homography R + t n^T.

    The scale is fixed by the middle singular value and the projective sign
    by majority vote of sign((M p)_3) over the visible sign-test pairs, which
    is +1 for the physically signed matrix.  Up to four poses are returned
    (two rotations, each with both translation signs); a rotation-only
    homography yields a single pure-rotation candidate with the reserved
    translation (1, 0, 0).
    """
    sv = np.linalg.svd(h_matrix, compute_uv=False)
    m = h_matrix / sv[1]
    if sum(np.sign((m @ p)[2]) for p, _ in sign_pairs) < 0.0:
        m = -m
    return _decompose_unit_sign(m)


def solve_homography_family(points, lines) -> SolverResult:
    """Pose candidates from four coplanar entities (points and/or lines)."""
    points = list(points)
    lines = list(lines)
    key = (len(points), len(lines))
    if key not in _FAMILY_KINDS:
        raise ValueError(f"homography family needs 4 coplanar entities, got {key}")
    h_matrix = estimate_homography(points, lines)
    candidates = decompose_homography(h_matrix, _sign_test_pairs(points, lines))
    return SolverResult(candidates, _FAMILY_KINDS[key])
