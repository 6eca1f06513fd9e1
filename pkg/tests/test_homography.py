"""Homography family: mixed DLT, decomposition, and the 2-2-0 degeneracy."""

import numpy as np
import pytest

from relpose.exceptions import DegenerateSample
from relpose.geometry import (
    PointMatch,
    RelativePose,
    cross,
    pose_errors,
    skew,
    unit,
)
from relpose.solvers import (
    SolverKind,
    decompose_homography,
    estimate_homography,
    solve,
    solve_homography_family,
)
from relpose.synth import SceneConfig, sample_scene


def scene(kind, seed, **cfg):
    return sample_scene(SolverKind(kind), SceneConfig(**cfg),
                        np.random.default_rng(seed))


class TestEstimateHomography:
    @pytest.mark.parametrize("kind", ["4-0-0", "3-1-0", "1-3-0", "0-4-0"])
    def test_recovered_h_maps_all_entities(self, kind):
        sc = scene(kind, 4000)
        h = estimate_homography(sc.data.points, sc.data.lines)
        for m in sc.data.points:
            assert np.linalg.norm(cross(m.p_prime, h @ m.p)) < 1e-9
        for lm in sc.data.lines:
            assert np.linalg.norm(cross(lm.l, h.T @ lm.l_prime)) < 1e-9

    def test_collinear_points_degenerate(self, rng):
        a = np.array([0.0, 0.0, 1.0])
        d = np.array([1.0, 0.5, 0.0])
        pts = [PointMatch(a + s * d, a + s * d) for s in (0.0, 0.5, 1.0, 2.0)]
        with pytest.raises(DegenerateSample):
            estimate_homography(pts, [])


class TestSolveHomographyFamily:
    @pytest.mark.parametrize("kind", ["4-0-0", "3-1-0", "1-3-0", "0-4-0"])
    def test_noiseless_recovery(self, kind):
        for i in range(25):
            sc = scene(kind, 4100 + i)
            result = solve(SolverKind(kind), sc.data.points, sc.data.lines,
                           sc.data.vps)
            assert len(result.candidates) <= 4
            assert min(max(pose_errors(c, sc.gt_pose))
                       for c in result.candidates) < 1e-6

    def test_identity_homography_flags_pure_rotation(self, rng):
        pts = []
        for _ in range(4):
            p = np.array([*rng.uniform(-0.3, 0.3, 2), 1.0])
            pts.append(PointMatch(p, p))
        result = solve_homography_family(pts, [])
        assert len(result.candidates) == 1
        cand = result.candidates[0]
        assert cand.pure_rotation
        assert np.abs(cand.rotation - np.eye(3)).max() < 1e-9
        assert np.allclose(cand.translation, [1.0, 0.0, 0.0])

    def test_decomposition_reproduces_h(self, rng):
        # every returned (R, t) must rebuild the input homography with some
        # normal: residual of the best rank-one completion is ~0
        sc = scene("4-0-0", 4200)
        h = estimate_homography(sc.data.points, sc.data.lines)
        pairs = [(m.p, m.p_prime) for m in sc.data.points]
        h = h / np.linalg.svd(h, compute_uv=False)[1]
        if sum(np.sign((h @ p)[2]) for p, _ in pairs) < 0:
            h = -h
        for cand in decompose_homography(h, pairs):
            diff = h - cand.rotation
            # diff should equal t n^T: subtracting the projection onto t
            # leaves nothing
            t = cand.translation
            residual = diff - np.outer(t, t @ diff)
            assert np.abs(residual).max() < 1e-9


class Test220Underdetermined:
    """2 points + 2 lines on a common plane do not determine the pose.

    The four derived collinear points (the two sample points and the
    intersections of their joining line with the two sample lines) carry a
    cross-ratio that is already determined by the data, so only 7 of the 8
    DLT constraints are independent: a one-parameter family of homographies,
    and hence of poses, fits exact data.  The solver reports this as a
    degenerate sample.
    """

    def test_design_matrix_rank_seven_on_exact_data(self):
        for i in range(10):
            sc = scene("2-2-0", 4300 + i)
            rows = []
            for m in sc.data.points:
                sp = skew(m.p_prime)
                rows.extend(np.kron(sp[k], m.p) for k in range(3))
            for lm in sc.data.lines:
                sl = skew(lm.l)
                rows.extend(np.kron(lm.l_prime, sl[k]) for k in range(3))
            sv = np.linalg.svd(np.array(rows), compute_uv=False)
            assert sv[6] / sv[0] > 1e-9   # 7 honest constraints
            assert sv[7] / sv[0] < 1e-12  # and no 8th

    def test_pencil_members_are_valid_homographies(self):
        sc = scene("2-2-0", 4310)
        rows = []
        for m in sc.data.points:
            sp = skew(m.p_prime)
            rows.extend(np.kron(sp[k], m.p) for k in range(3))
        for lm in sc.data.lines:
            sl = skew(lm.l)
            rows.extend(np.kron(lm.l_prime, sl[k]) for k in range(3))
        null = np.linalg.svd(np.array(rows))[2][7:]
        for lam in (0.2, 0.8):
            h = ((1 - lam) * null[0] + lam * null[1]).reshape(3, 3)
            for m in sc.data.points:
                assert np.linalg.norm(cross(m.p_prime, h @ m.p)) < 1e-9
            for lm in sc.data.lines:
                assert np.linalg.norm(cross(lm.l, h.T @ lm.l_prime)) < 1e-9

    def test_solver_raises_degenerate_sample(self):
        sc = scene("2-2-0", 4320)
        with pytest.raises(DegenerateSample):
            solve_homography_family(sc.data.points, sc.data.lines)
