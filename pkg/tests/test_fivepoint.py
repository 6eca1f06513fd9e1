"""Five-point essential matrix solver."""

import numpy as np
import pytest

from relpose.exceptions import DegenerateSample, RelposeError
from relpose.geometry import (
    PointMatch,
    epipolar_residual,
    essential_from_pose,
    pose_errors,
)
from relpose.solvers import SolverKind, essential_candidates, solve_5pc
from relpose.synth import SceneConfig, sample_scene


def scene(kind, seed, **cfg):
    return sample_scene(SolverKind(kind), SceneConfig(**cfg),
                        np.random.default_rng(seed))


class TestSolve5pc:
    def test_noiseless_recovery(self):
        for i in range(40):
            sc = scene("5-0-0", 3000 + i)
            result = solve_5pc(sc.data.points)
            assert len(result.candidates) <= 10
            assert min(max(pose_errors(c, sc.gt_pose))
                       for c in result.candidates) < 1e-6

    def test_essential_matrices_satisfy_constraints(self):
        sc = scene("5-0-0", 3100)
        for e in essential_candidates(sc.data.points):
            assert abs(np.linalg.det(e)) < 1e-8
            trace_residual = 2 * e @ e.T @ e - np.trace(e @ e.T) * e
            assert np.abs(trace_residual).max() < 1e-8
            for m in sc.data.points:
                assert abs(m.p_prime @ e @ m.p) < 1e-9

    def test_zero_baseline_sample(self):
        # Five identical projections in both views: either flagged degenerate
        # or solved algebraically.  Without parallax the pose decomposition
        # is meaningless (documented), but every essential matrix returned
        # must still annihilate the correspondences.
        rng = np.random.default_rng(5)
        pts = []
        for _ in range(5):
            x = rng.standard_normal(3) + [0, 0, 5]
            pts.append(PointMatch(x / x[2], x / x[2]))
        try:
            matrices = essential_candidates(pts)
        except DegenerateSample:
            return
        assert matrices
        for e in matrices:
            for m in pts:
                assert abs(m.p_prime @ e @ m.p) < 1e-9

    def test_planar_five_tuple_still_solvable(self):
        # Points on one plane keep a twofold E ambiguity; the GT pose must
        # appear among the candidates.
        for i in range(20):
            sc = scene("4-0-0", 3200 + i)
            points = list(sc.data.points)
            # a fifth coplanar point from an extra 4-0-0 draw of the same
            # scene is not available, so synthesize one on the same plane by
            # intersecting with a known plane is overkill: take 3-1-0's
            # 3 points + line endpoints instead.
            sc2 = scene("3-1-0", 3200 + i)
            lm = sc2.data.lines[0]
            planar = list(sc2.data.points) + [
                PointMatch(lm.a, lm.a_prime), PointMatch(lm.b, lm.b_prime)]
            result = solve_5pc(planar)
            assert min(max(pose_errors(c, sc2.gt_pose))
                       for c in result.candidates) < 1e-6

    def test_duplicated_point_degenerate(self):
        sc = scene("5-0-0", 3300)
        pts = list(sc.data.points[:4]) + [sc.data.points[0]]
        with pytest.raises((DegenerateSample, RelposeError)):
            result = solve_5pc(pts)
            # a duplicated point can still leave rank 5; accept a valid
            # solve that recovers the pose as the alternative outcome
            if min(max(pose_errors(c, sc.gt_pose))
                   for c in result.candidates) < 1e-6:
                raise DegenerateSample("solved despite duplication")

    def test_candidate_count_bound_holds(self):
        for i in range(30):
            sc = scene("5-0-0", 3400 + i)
            assert len(solve_5pc(sc.data.points).candidates) <= 10


class TestDecomposeEssential:
    def test_roundtrip_from_pose(self, rng):
        from conftest import random_pose
        for _ in range(50):
            pose = random_pose(rng)
            sc = scene("5-0-0", int(rng.integers(1 << 30)))
            # decompose the exact essential matrix of the scene's own pose
            e = essential_from_pose(sc.gt_pose)
            from relpose.solvers import decompose_essential
            best = decompose_essential(e, sc.data.points)
            assert max(pose_errors(best, sc.gt_pose)) < 1e-10
