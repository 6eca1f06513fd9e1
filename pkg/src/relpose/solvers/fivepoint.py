"""Essential matrix from five calibrated point pairs.

The nullspace of the 5x9 epipolar design matrix gives E as a linear
combination x E1 + y E2 + z E3 + E4.  The rank constraint det(E) = 0 and the
trace constraint 2 E E^T E - tr(E E^T) E = 0 yield ten cubic equations in
(x, y, z); eliminating the degree-3 monomials produces a 10x10 action matrix
whose eigenvectors carry the up-to-ten real solutions.
"""

from __future__ import annotations

from itertools import product

import numpy as np

from ..exceptions import DegenerateSample
from ..geometry import RelativePose, triangulate_depths
from .kinds import SolverKind, SolverResult

RANK_RATIO_TOL = 1e-9
_EIG_IMAG_TOL = 1e-8

# Monomials in (x, y, z): the ten cubics first, the quotient-ring basis after.
_MONOMIALS = [
    (3, 0, 0), (2, 1, 0), (2, 0, 1), (1, 2, 0), (1, 1, 1),
    (1, 0, 2), (0, 3, 0), (0, 2, 1), (0, 1, 2), (0, 0, 3),
    (2, 0, 0), (1, 1, 0), (1, 0, 1), (0, 2, 0), (0, 1, 1),
    (0, 0, 2), (1, 0, 0), (0, 1, 0), (0, 0, 1), (0, 0, 0),
]
_MONOMIAL_INDEX = {m: i for i, m in enumerate(_MONOMIALS)}


def _column_for_triple(triple):
    expo = [0, 0, 0]
    for var in triple:
        if var < 3:
            expo[var] += 1
    return _MONOMIAL_INDEX[tuple(expo)]


_TRIPLES = list(product(range(4), repeat=3))
_TRIPLE_COLUMNS = np.array([_column_for_triple(t) for t in _TRIPLES])
_TA = np.array([t[0] for t in _TRIPLES])
_TB = np.array([t[1] for t in _TRIPLES])
_TC = np.array([t[2] for t in _TRIPLES])

_W = np.array([
    [0.0, -1.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0],
])


def _constraint_matrix(basis):
    """10x20 coefficients of the det and trace cubics over the monomials."""
    coeffs = np.zeros((10, 20))

    # det(E): trilinear in the columns of E.
    col0, col1, col2 = basis[:, :, 0], basis[:, :, 1], basis[:, :, 2]
    cr = np.cross(col1[:, None, :], col2[None, :, :])          # (4, 4, 3)
    det_terms = np.einsum("ai,bci->abc", col0, cr).reshape(-1)  # (64,)
    np.add.at(coeffs[0], _TRIPLE_COLUMNS, det_terms)

    # 2 E E^T E - tr(E E^T) E: nine cubics, trilinear in E.
    m1 = np.einsum("aij,bkj->abik", basis, basis)               # E_a E_b^T
    tr1 = np.einsum("abii->ab", m1)
    g = 2.0 * np.einsum("abij,cjk->abcik", m1, basis)
    g -= tr1[:, :, None, None, None] * basis[None, None, :, :, :]
    g = g.reshape(64, 9)
    acc = np.zeros((20, 9))
    np.add.at(acc, _TRIPLE_COLUMNS, g)
    coeffs[1:] = acc.T
    return coeffs


def _action_matrix(coeffs):
    """Multiplication-by-x operator on the ten-dimensional quotient basis."""
    reduced = -np.linalg.solve(coeffs[:, :10], coeffs[:, 10:])
    action = np.zeros((10, 10))
    # x * {x^2, xy, xz, y^2, yz, z^2} are the cubics 0..5 in _MONOMIALS.
    action[:, :6] = reduced[:6].T
    action[0, 6] = 1.0   # x * x = x^2
    action[1, 7] = 1.0   # x * y = xy
    action[2, 8] = 1.0   # x * z = xz
    action[6, 9] = 1.0   # x * 1 = x
    return action


def decompose_essential(e_matrix, point_matches):
    """(R, t) from an essential matrix, picked by sample cheirality votes.

    Of the four algebraic decompositions the one with the most sample points
    triangulating in front of both cameras wins; ties keep the earlier
    combination.
    """
    u, _, vt = np.linalg.svd(e_matrix)
    if np.linalg.det(u) < 0.0:
        u = -u
    if np.linalg.det(vt) < 0.0:
        vt = -vt
    t = u[:, 2]
    rotations = (u @ _W @ vt, u @ _W.T @ vt)
    best = None
    best_votes = -1
    for rotation in rotations:
        for translation in (t, -t):
            votes = 0
            for m in point_matches:
                z1, z2 = triangulate_depths(rotation, translation, m.p, m.p_prime)
                if z1 > 0.0 and z2 > 0.0:
                    votes += 1
            if votes > best_votes:
                best_votes = votes
                best = RelativePose(rotation, translation)
    return best


def essential_candidates(point_matches) -> list:
    """All essential matrices consistent with five calibrated point pairs."""
    design = np.array([np.outer(m.p_prime, m.p).ravel() for m in point_matches])
    _, sv, vt = np.linalg.svd(design)
    if sv[4] < RANK_RATIO_TOL * sv[0]:
        raise DegenerateSample("epipolar design matrix is rank-deficient")
    basis = vt[5:9].reshape(4, 3, 3)

    coeffs = _constraint_matrix(basis)
    try:
        action = _action_matrix(coeffs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateSample("cubic system is not reducible for this sample") from exc

    eigvals, eigvecs = np.linalg.eig(action.T)
    matrices = []
    for k in range(10):
        lam = eigvals[k]
        if abs(lam.imag) > _EIG_IMAG_TOL * (1.0 + abs(lam.real)):
            continue
        vec = np.real(eigvecs[:, k])
        if abs(vec[9]) < 1e-12:
            continue
        x, y, z = vec[6:9] / vec[9]
        e_matrix = x * basis[0] + y * basis[1] + z * basis[2] + basis[3]
        matrices.append(e_matrix / np.linalg.norm(e_matrix))
    return matrices


def solve_5pc(point_matches) -> SolverResult:
    """Pose candidates from five calibrated point pairs.

    Each essential matrix contributes the decomposition preferred by the
    sample's cheirality, so at most ten poses are returned.  A zero-baseline
    (pure rotation) sample is not special-cased: it either trips the
    rank-deficiency check or yields candidates whose translation is
    meaningless, which downstream scoring discards.
    """
    candidates = [decompose_essential(e, point_matches)
                  for e in essential_candidates(point_matches)]
    return SolverResult(candidates, SolverKind.P5)
