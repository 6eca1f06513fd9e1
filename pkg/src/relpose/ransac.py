"""Hybrid RANSAC over all minimal solvers plus non-linear pose refinement.

Solvers are sampled with probability proportional to a prior times the
estimated inlier ratio of each required modality raised to its sample size;
the line ratio is pinned to 0.6 because line correctness cannot be verified
from a pose.  Hypotheses are scored MSAC-style on points and VPs only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import EstimationFailed, InsufficientData, NearParallel, RelposeError
from .geometry import (
    LineMatch,
    PointMatch,
    RelativePose,
    VPMatch,
    cross,
    essential_from_pose,
    line_line_junction,
    rotation_angle,
    skew,
    so3_exp,
    tangent_basis,
    triangulate_depths,
    unit,
)
from .solvers import SolverKind, solve

LINE_INLIER_RATIO = 0.6
INITIAL_INLIER_RATIO = 0.5


def _segment_param(x, a, b):
    d = b[:2] - a[:2]
    dd = d @ d
    if dd == 0.0:
        return -1.0
    return ((x[:2] - a[:2]) @ d) / dd


def _junction_inside_segments(jm, la, lb):
    for x, a, b in ((jm.p, la.a, la.b), (jm.p, lb.a, lb.b),
                    (jm.p_prime, la.a_prime, la.b_prime),
                    (jm.p_prime, lb.a_prime, lb.b_prime)):
        s = _segment_param(x, a, b)
        if not 0.0 <= s <= 1.0:
            return False
    return True


def derive_junction_points(lines) -> list:
    """Junctions of segment pairs that actually intersect in both images."""
    out = []
    for i in range(len(lines)):
        for j in range(i + 1, len(lines)):
            try:
                jm = line_line_junction(lines[i], lines[j])
            except NearParallel:
                continue
            if _junction_inside_segments(jm, lines[i], lines[j]):
                out.append(jm)
    return out


def derive_endpoint_points(lines) -> list:
    """Line endpoints treated as additional point correspondences."""
    out = []
    for lm in lines:
        out.append(PointMatch(lm.a, lm.a_prime))
        out.append(PointMatch(lm.b, lm.b_prime))
    return out


@dataclass(frozen=True, eq=False)
class CorrespondenceSet:
    """All calibrated correspondences of one image pair."""

    points: tuple = ()
    lines: tuple = ()
    vps: tuple = ()
    junction_points: tuple = ()
    endpoint_points: tuple = ()

    @classmethod
    def build(cls, points=(), lines=(), vps=(),
              derive_junctions=True, derive_endpoints=True) -> "CorrespondenceSet":
        lines = tuple(lines)
        return cls(
            tuple(points), lines, tuple(vps),
            tuple(derive_junction_points(lines)) if derive_junctions else (),
            tuple(derive_endpoint_points(lines)) if derive_endpoints else (),
        )

    def point_pool(self, use_junctions=True, use_endpoints=True) -> list:
        pool = list(self.points)
        if use_junctions:
            pool.extend(self.junction_points)
        if use_endpoints:
            pool.extend(self.endpoint_points)
        return pool


@dataclass(frozen=True)
class RansacConfig:
    """Thresholds, priors, and sampling controls for one estimation run."""

    point_threshold: float = 1.5e-3        # calibrated Sampson units (1.5 px at f=1000)
    vp_threshold: float = math.radians(2.0)
    confidence: float = 0.9999
    max_iterations: int = 5000
    solver_priors: dict | None = None       # SolverKind -> weight; None = uniform
    line_inlier_ratio_prior: float = LINE_INLIER_RATIO
    rng_seed: int = 0
    enabled_solvers: frozenset = frozenset(SolverKind)
    use_junctions: bool = True
    use_endpoints: bool = True
    vp_weight: float = 10.0                 # VP term weight inside refinement
    vp_score_weight: float = 4.0            # VP modality weight in MSAC scoring

    def __post_init__(self):
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must be in (0, 1)")
        if self.point_threshold <= 0.0 or self.vp_threshold <= 0.0:
            raise ValueError("thresholds must be positive")
        priors = self.solver_priors
        if priors is not None and all(w <= 0.0 for w in priors.values()):
            raise ValueError("at least one solver prior must be positive")


@dataclass
class SolverStats:
    draws: int = 0
    successes: int = 0
    best_score: float = math.inf


@dataclass
class RansacReport:
    best_pose: RelativePose
    point_inliers: tuple
    vp_inliers: tuple
    score: float
    iterations: int
    per_solver_stats: dict
    terminated_by: str


def _pool_arrays(pool):
    if not pool:
        return np.zeros((0, 3)), np.zeros((0, 3))
    return (np.array([m.p for m in pool]), np.array([m.p_prime for m in pool]))


def _vp_arrays(vps):
    if not vps:
        return np.zeros((0, 3)), np.zeros((0, 3))
    return (np.array([m.v for m in vps]), np.array([m.v_prime for m in vps]))


def _sampson_all(pose, p1, p2):
    e = essential_from_pose(pose)
    ep = p1 @ e.T
    etp = p2 @ e
    c = np.einsum("ij,ij->i", p2, ep)
    d = ep[:, 0] ** 2 + ep[:, 1] ** 2 + etp[:, 0] ** 2 + etp[:, 1] ** 2
    d = np.maximum(d, 1e-300)
    return np.abs(c) / np.sqrt(d)


def _vp_res_all(pose, v1, v2):
    if len(v1) == 0:
        return np.zeros(0)
    rv = v1 @ pose.rotation.T
    c = np.abs(np.einsum("ij,ij->i", v2, rv))
    s = np.linalg.norm(np.cross(v2, rv), axis=-1)
    return np.arctan2(s, c)


def msac_score(pose, p1, p2, v1, v2, cfg: RansacConfig) -> float:
    """Truncated squared residuals, each modality scaled by its threshold.

    Per-threshold scaling makes one point contribute at most 1.0 and one VP
    at most vp_score_weight; without the scaling the radians-squared VP term
    dwarfs the calibrated Sampson term and two bad VPs can outvote a hundred
    point inliers.  The VP modality weight reflects that a VP distilled from
    many line matches is stronger evidence than a single point match; without
    it, scoring over few points cannot separate an exact-on-its-own-sample
    minimal hypothesis from the true pose.
    """
    s = _sampson_all(pose, p1, p2)
    score = float(np.minimum(s * s / cfg.point_threshold ** 2, 1.0).sum())
    r = _vp_res_all(pose, v1, v2)
    score += cfg.vp_score_weight * float(
        np.minimum(r * r / cfg.vp_threshold ** 2, 1.0).sum())
    return score


def classify_inliers(pose: RelativePose, data: CorrespondenceSet,
                     cfg: RansacConfig) -> tuple:
    """(point inlier indices, VP inlier indices) under the config thresholds.

    Point indices refer to the effective pool: points, then derived
    junctions, then derived endpoints, as enabled by the config.
    """
    pool = data.point_pool(cfg.use_junctions, cfg.use_endpoints)
    p1, p2 = _pool_arrays(pool)
    v1, v2 = _vp_arrays(data.vps)
    s = _sampson_all(pose, p1, p2) if len(pool) else np.zeros(0)
    r = _vp_res_all(pose, v1, v2)
    return (tuple(np.nonzero(s < cfg.point_threshold)[0].tolist()),
            tuple(np.nonzero(r < cfg.vp_threshold)[0].tolist()))


def _cheirality_matches(kind, pts, lns):
    matches = list(pts)
    if kind in (SolverKind.L3V1, SolverKind.L4H, SolverKind.P2L3):
        for i in range(len(lns)):
            for j in range(i + 1, len(lns)):
                try:
                    matches.append(line_line_junction(lns[i], lns[j]))
                except NearParallel:
                    continue
    elif kind is SolverKind.P1L2V1_PERP:
        try:
            matches.append(line_line_junction(lns[0], lns[1]))
        except NearParallel:
            pass
    return matches


def _passes_cheirality(pose, matches):
    if pose.pure_rotation:
        return True
    for m in matches:
        z1, z2 = triangulate_depths(pose.rotation, pose.translation, m.p, m.p_prime)
        if z1 <= 0.0 or z2 <= 0.0:
            return False
    return True


def required_iterations(success_probability, confidence) -> float:
    """Standard RANSAC iteration bound; inf when success is impossible."""
    if success_probability <= 0.0:
        return math.inf
    if success_probability >= 1.0:
        return 1.0
    return math.log(1.0 - confidence) / math.log(1.0 - success_probability)


FINALISTS = 5
_BASIN_SEPARATION = math.radians(0.25)


def _update_finalists(finalists, score, angle, pose) -> bool:
    """Track the best few hypotheses from distinct rotation basins.

    Returns True when the leading hypothesis changed.  Two hypotheses whose
    rotations differ by less than the separation angle count as one basin and
    only the better of them is kept; equal scores break toward the smaller
    rotation angle.
    """
    for i, (s, a, p) in enumerate(finalists):
        if rotation_angle(p.rotation.T @ pose.rotation) < _BASIN_SEPARATION:
            if score < s or (score == s and angle < a):
                finalists[i] = (score, angle, pose)
                finalists.sort(key=lambda e: (e[0], e[1]))
                return i == 0 or finalists[0][2] is pose
            return False
    finalists.append((score, angle, pose))
    finalists.sort(key=lambda e: (e[0], e[1]))
    if len(finalists) > FINALISTS:
        finalists.pop()
    return finalists[0][2] is pose


def run_hybrid_ransac(data: CorrespondenceSet, cfg: RansacConfig) -> RansacReport:
    """Robust pose estimation mixing all enabled minimal solvers.

    Raises InsufficientData when no enabled solver can draw a minimal sample
    and EstimationFailed when no hypothesis ever scores finitely.
    """
    pool = data.point_pool(cfg.use_junctions, cfg.use_endpoints)
    p1, p2 = _pool_arrays(pool)
    v1, v2 = _vp_arrays(data.vps)
    n_points, n_lines, n_vps = len(pool), len(data.lines), len(data.vps)

    kinds = [k for k in SolverKind if k in cfg.enabled_solvers]
    sampleable = [k for k in kinds
                  if k.sample_size[0] <= n_points
                  and k.sample_size[1] <= n_lines
                  and k.sample_size[2] <= n_vps]
    if not sampleable:
        raise InsufficientData(
            f"no enabled solver is sampleable from {n_points} points, "
            f"{n_lines} lines, {n_vps} VPs")

    priors = cfg.solver_priors or {}
    weights = np.array([float(priors.get(k, 1.0)) for k in sampleable])
    if weights.sum() <= 0.0:
        raise InsufficientData("all sampleable solvers have zero prior")

    rng = np.random.default_rng(cfg.rng_seed)
    stats = {k: SolverStats() for k in kinds}
    ratio_pt = INITIAL_INLIER_RATIO
    ratio_vp = INITIAL_INLIER_RATIO
    finalists = []  # up to FINALISTS (score, angle, pose), basin-separated
    iterations = 0
    terminated_by = "max_iterations"

    def success_probability(kind, floor=0.0):
        np_, nl_, nv_ = kind.sample_size
        return (max(ratio_pt, floor) ** np_
                * cfg.line_inlier_ratio_prior ** nl_
                * max(ratio_vp, floor) ** nv_)

    while iterations < cfg.max_iterations:
        iterations += 1
        # Sampling keeps the optimistic initial ratio as a floor: a poor
        # early model would otherwise starve the large-sample solvers of
        # draws and the estimate could never recover.  Termination uses the
        # unfloored ratios.
        probs = weights * np.array(
            [success_probability(k, INITIAL_INLIER_RATIO) for k in sampleable])
        total = probs.sum()
        if total <= 0.0:
            probs = weights / weights.sum()
        else:
            probs = probs / total
        if len(sampleable) == 1:
            kind = sampleable[0]
        else:
            kind = sampleable[int(rng.choice(len(sampleable), p=probs))]
        stats[kind].draws += 1

        np_, nl_, nv_ = kind.sample_size
        pts = [pool[i] for i in rng.choice(n_points, np_, replace=False)] if np_ else []
        lns = [data.lines[i] for i in rng.choice(n_lines, nl_, replace=False)] if nl_ else []
        vms = [data.vps[i] for i in rng.choice(n_vps, nv_, replace=False)] if nv_ else []

        try:
            result = solve(kind, pts, lns, vms)
        except RelposeError:
            continue

        test_matches = _cheirality_matches(kind, pts, lns)
        scored_any = False
        for cand in result.candidates:
            if not _passes_cheirality(cand, test_matches):
                continue
            score = msac_score(cand, p1, p2, v1, v2, cfg)
            if not math.isfinite(score):
                continue
            scored_any = True
            if score < stats[kind].best_score:
                stats[kind].best_score = score
            improved = _update_finalists(finalists, score,
                                         rotation_angle(cand.rotation), cand)
            if improved:
                pt_in, vp_in = classify_inliers(finalists[0][2], data, cfg)
                if n_points:
                    ratio_pt = len(pt_in) / n_points
                if n_vps:
                    ratio_vp = len(vp_in) / n_vps
        if scored_any:
            stats[kind].successes += 1

        if finalists:
            done = all(stats[k].draws >= required_iterations(
                success_probability(k), cfg.confidence) for k in sampleable)
            if done:
                terminated_by = "confidence"
                break

    if not finalists:
        raise EstimationFailed("no candidate pose achieved a finite score")

    # Final refinement: each basin-separated finalist is polished once and
    # the best refined pose wins.  The truncated point cost is outlier-robust,
    # so refinement sees the whole pool and points re-enter the gradient as
    # the pose improves; the quadratic VP term only gets classified inliers.
    best_pose = None
    best_score = math.inf
    for _, _, cand in finalists:
        pt_in, vp_in = classify_inliers(cand, data, cfg)
        if len(pt_in) >= 5 or (len(pt_in) >= 3 and len(vp_in) >= 1):
            cand = refine_pose(cand, data, (tuple(range(n_points)), vp_in), cfg)
        score = msac_score(cand, p1, p2, v1, v2, cfg)
        if score < best_score:
            best_score = score
            best_pose = cand
    pt_in, vp_in = classify_inliers(best_pose, data, cfg)

    return RansacReport(
        best_pose=best_pose,
        point_inliers=pt_in,
        vp_inliers=vp_in,
        score=msac_score(best_pose, p1, p2, v1, v2, cfg),
        iterations=iterations,
        per_solver_stats=stats,
        terminated_by=terminated_by,
    )


# --- non-linear refinement over a 5-parameter pose chart ------------------

def retract(pose: RelativePose, delta) -> RelativePose:
    """Local chart: 3 rotation tangent parameters plus 2 on the t-sphere."""
    rotation = pose.rotation @ so3_exp(delta[:3])
    translation = unit(pose.translation + tangent_basis(pose.translation) @ delta[3:5])
    return RelativePose(rotation, translation)


def point_residual_jacobian(pose: RelativePose, p1, p2):
    """Signed Sampson residuals (N,) and their Jacobian (N,5) at the chart origin."""
    r0, t0 = pose.rotation, pose.translation
    e = skew(t0) @ r0
    ep = p1 @ e.T
    etp = p2 @ e
    c = np.einsum("ij,ij->i", p2, ep)
    d = np.maximum(ep[:, 0] ** 2 + ep[:, 1] ** 2 + etp[:, 0] ** 2 + etp[:, 1] ** 2,
                   1e-300)
    sqrt_d = np.sqrt(d)
    res = c / sqrt_d

    basis = tangent_basis(t0)
    de_list = [skew(t0) @ r0 @ skew(ek) for ek in np.eye(3)]
    de_list += [skew(basis[:, j]) @ r0 for j in range(2)]

    jac = np.empty((len(p1), 5))
    for k, de in enumerate(de_list):
        dep = p1 @ de.T
        detp = p2 @ de
        dc = np.einsum("ij,ij->i", p2, dep)
        dd = 2.0 * (ep[:, 0] * dep[:, 0] + ep[:, 1] * dep[:, 1]
                    + etp[:, 0] * detp[:, 0] + etp[:, 1] * detp[:, 1])
        jac[:, k] = (dc - c * dd / (2.0 * d)) / sqrt_d
    return res, jac


def vp_residual_jacobian(pose: RelativePose, v1, v2):
    """Tangent-plane VP residuals (2M,) and their Jacobian (2M,5).

    Each VP contributes the two components of R v projected onto the tangent
    plane of the sign-folded v'; their norm is sin of the angular residual.
    Unlike the angle itself, this parameterization is smooth at zero
    residual, where the angle's derivative degenerates to 0/0 and hides the
    VP constraint from the optimizer.
    """
    r0 = pose.rotation
    res = np.zeros(2 * len(v1))
    jac = np.zeros((2 * len(v1), 5))
    for i in range(len(v1)):
        u = r0 @ v1[i]
        sign = 1.0 if v2[i] @ u >= 0.0 else -1.0
        basis = tangent_basis(sign * v2[i])
        res[2 * i:2 * i + 2] = basis.T @ u
        for k in range(3):
            ek = np.zeros(3)
            ek[k] = 1.0
            jac[2 * i:2 * i + 2, k] = basis.T @ (r0 @ cross(ek, v1[i]))
    return res, jac


def _refine_cost(pose, p1, p2, v1, v2, cfg):
    # Same threshold scaling as the MSAC score; vp_weight says how many
    # threshold-level points one VP residual is worth.
    s = _sampson_all(pose, p1, p2) if len(p1) else np.zeros(0)
    cost = float(np.minimum(s * s / cfg.point_threshold ** 2, 1.0).sum())
    r = _vp_res_all(pose, v1, v2)
    cost += cfg.vp_weight * float((r * r).sum()) / cfg.vp_threshold ** 2
    return cost


def refine_pose(pose: RelativePose, data: CorrespondenceSet, inliers,
                cfg: RansacConfig | None = None, max_iterations: int = 50) -> RelativePose:
    """Levenberg-Marquardt over (rotation tangent, translation sphere tangent).

    Minimizes truncated squared Sampson over the point inliers plus the
    weighted squared VP residual over the VP inliers.  Steps that do not
    decrease the cost are rejected, so the final cost never exceeds the
    initial one; with nothing to improve the input pose is returned.
    """
    cfg = cfg or RansacConfig()
    pt_idx, vp_idx = inliers
    pool = data.point_pool(cfg.use_junctions, cfg.use_endpoints)
    pts = [pool[i] for i in pt_idx]
    vps = [data.vps[i] for i in vp_idx]
    p1, p2 = _pool_arrays(pts)
    v1, v2 = _vp_arrays(vps)
    if len(pts) == 0 and len(vps) == 0:
        return pose

    current = pose
    cost = _refine_cost(current, p1, p2, v1, v2, cfg)
    lam = 1e-3
    w_pt = 1.0 / cfg.point_threshold
    w_vp = math.sqrt(cfg.vp_weight) / cfg.vp_threshold
    for _ in range(max_iterations):
        res_p, jac_p = point_residual_jacobian(current, p1, p2)
        active = np.abs(res_p) < cfg.point_threshold
        res_v, jac_v = vp_residual_jacobian(current, v1, v2)
        res = np.concatenate([w_pt * res_p[active], w_vp * res_v])
        jac = np.vstack([w_pt * jac_p[active], w_vp * jac_v])
        if len(res) == 0:
            break
        grad = jac.T @ res
        if np.abs(grad).max() < 1e-14:
            break
        hess = jac.T @ jac
        stepped = False
        for _ in range(8):
            try:
                delta = np.linalg.solve(hess + lam * np.diag(np.diag(hess))
                                        + 1e-15 * np.eye(5), -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = retract(current, delta)
            trial_cost = _refine_cost(trial, p1, p2, v1, v2, cfg)
            if trial_cost < cost:
                current = trial
                cost = trial_cost
                lam = max(lam / 3.0, 1e-12)
                stepped = True
                break
            lam *= 10.0
        if not stepped:
            break
    return current
