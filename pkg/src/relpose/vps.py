"""Joint vanishing point detection and matching from matched line segments.

A two-line-pair minimal solver proposes a VP match, lines are scored with the
pixel orthogonal distance (segment endpoint to the line joining the VP and
the segment midpoint), and a greedy sequential multi-model loop extracts VP
models one by one, each optionally refined by Levenberg-Marquardt on the
sphere.  A line is an inlier only if it is within threshold in both images.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import NearParallel
from .geometry import (
    CameraIntrinsics,
    LineMatch,
    PARALLEL_TOL,
    cross,
    tangent_basis,
    unit,
)

RANSAC_CONFIDENCE = 0.99
MAX_ITERATIONS_PER_MODEL = 1000


@dataclass(frozen=True)
class VPFitConfig:
    inlier_threshold: float = 2.0   # pixels
    min_support: int = 4
    max_models: int = 8
    rng_seed: int = 0
    refine: bool = True

    def __post_init__(self):
        if self.inlier_threshold <= 0.0:
            raise ValueError("inlier_threshold must be positive")
        if self.min_support < 2:
            raise ValueError("min_support must be at least 2")


@dataclass(frozen=True, eq=False)
class VPModel:
    v: np.ndarray
    v_prime: np.ndarray
    inlier_lines: tuple


def vp_minimal_from_two_line_pairs(a: LineMatch, b: LineMatch) -> tuple:
    """VP match implied by two line matches: unit cross products per image."""
    w = cross(a.l, b.l)
    w_prime = cross(a.l_prime, b.l_prime)
    if (np.linalg.norm(w) < PARALLEL_TOL
            or np.linalg.norm(w_prime) < PARALLEL_TOL):
        raise NearParallel("the two lines are parallel; no finite VP direction")
    return unit(w), unit(w_prime)


_IDENTITY_K = CameraIntrinsics(1.0, 1.0, 0.0, 0.0)


def _pixel_h(intrinsics, p):
    return intrinsics.matrix @ p


def tardif_distance(v, a, b, intrinsics: CameraIntrinsics | None = None) -> float:
    """Orthogonal pixel distance of a segment to a VP direction.

    Measured from an endpoint to the line joining the VP and the segment
    midpoint; both endpoints are equidistant since that line passes through
    the midpoint.  ``a`` and ``b`` are calibrated endpoints; intrinsics map
    them (and the VP) to pixels.
    """
    k = intrinsics or _IDENTITY_K
    ah = _pixel_h(k, a)
    bh = _pixel_h(k, b)
    vh = _pixel_h(k, v)
    mid = 0.5 * (ah / ah[2] + bh / bh[2])
    line = cross(vh, mid)
    nrm = np.hypot(line[0], line[1])
    if nrm < 1e-300:
        return 0.0
    return abs(line @ (ah / ah[2])) / nrm


def tardif_distances(v, lines, intrinsics: CameraIntrinsics | None = None,
                     image: int = 0) -> np.ndarray:
    """Vectorized Tardif distances of many line matches in one image."""
    k = (intrinsics or _IDENTITY_K).matrix
    if image == 0:
        a = np.array([lm.a for lm in lines])
        b = np.array([lm.b for lm in lines])
    else:
        a = np.array([lm.a_prime for lm in lines])
        b = np.array([lm.b_prime for lm in lines])
    ah = a @ k.T
    bh = b @ k.T
    ah = ah / ah[:, 2:3]
    bh = bh / bh[:, 2:3]
    mid = 0.5 * (ah + bh)
    vh = k @ v
    ln = np.cross(np.broadcast_to(vh, mid.shape), mid)
    nrm = np.maximum(np.hypot(ln[:, 0], ln[:, 1]), 1e-300)
    return np.abs(np.einsum("ij,ij->i", ln, ah)) / nrm


def _joint_inliers(v, v_prime, lines, threshold, intrinsics):
    k1, k2 = intrinsics
    d1 = tardif_distances(v, lines, k1, image=0)
    d2 = tardif_distances(v_prime, lines, k2, image=1)
    return np.nonzero((d1 <= threshold) & (d2 <= threshold))[0]


def refine_vp(model: VPModel, lines, intrinsics=None) -> VPModel:
    """Least-squares VP refit over the model's inliers, per image.

    Levenberg-Marquardt on a two-parameter tangent chart of the unit sphere;
    the summed squared Tardif distance never increases.
    """
    k1, k2 = intrinsics if intrinsics is not None else (None, None)
    inl = [lines[i] for i in model.inlier_lines]
    v = _refine_direction(model.v, inl, k1, image=0)
    v_prime = _refine_direction(model.v_prime, inl, k2, image=1)
    return VPModel(v, v_prime, model.inlier_lines)


def _refine_direction(v, lines, intrinsics, image, max_iterations=30):
    def cost_of(d):
        r = tardif_distances(d, lines, intrinsics, image=image)
        return float((r * r).sum()), r

    current = v
    cost, _ = cost_of(current)
    lam = 1e-3
    step = 1e-6
    for _ in range(max_iterations):
        basis = tangent_basis(current)
        _, res = cost_of(current)
        jac = np.empty((len(lines), 2))
        for j in range(2):
            plus = unit(current + step * basis[:, j])
            minus = unit(current - step * basis[:, j])
            jac[:, j] = (tardif_distances(plus, lines, intrinsics, image=image)
                         - tardif_distances(minus, lines, intrinsics, image=image)
                         ) / (2.0 * step)
        grad = jac.T @ res
        if np.abs(grad).max() < 1e-14:
            break
        hess = jac.T @ jac
        stepped = False
        for _ in range(8):
            try:
                delta = np.linalg.solve(hess + lam * np.eye(2), -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = unit(current + basis @ delta)
            trial_cost, _ = cost_of(trial)
            if trial_cost < cost:
                current, cost = trial, trial_cost
                lam = max(lam / 3.0, 1e-12)
                stepped = True
                break
            lam *= 10.0
        if not stepped:
            break
    return current


def fit_vps_jointly(lines, cfg: VPFitConfig, intrinsics=None) -> list:
    """Greedy sequential multi-model VP extraction.

    Repeats adaptive RANSAC over two-line-pair samples, keeps the model with
    the largest both-image inlier support (earliest iteration wins ties),
    optionally refines it, removes its inliers, and continues until
    max_models or no model reaches min_support.  An empty list is a valid
    result.  ``intrinsics`` is a per-image pair; identity when omitted.
    """
    if intrinsics is None:
        intrinsics = (None, None)
    lines = list(lines)
    rng = np.random.default_rng(cfg.rng_seed)
    remaining = list(range(len(lines)))
    models = []

    while len(models) < cfg.max_models and len(remaining) >= max(2, cfg.min_support):
        sub = [lines[i] for i in remaining]
        best_support = 0
        best = None
        needed = MAX_ITERATIONS_PER_MODEL
        it = 0
        while it < min(needed, MAX_ITERATIONS_PER_MODEL):
            it += 1
            i, j = rng.choice(len(sub), 2, replace=False)
            try:
                v, v_prime = vp_minimal_from_two_line_pairs(sub[i], sub[j])
            except NearParallel:
                continue
            inl = _joint_inliers(v, v_prime, sub, cfg.inlier_threshold, intrinsics)
            if len(inl) > best_support:
                best_support = len(inl)
                best = (v, v_prime, inl)
                ratio = best_support / len(sub)
                needed = required_samples(ratio, RANSAC_CONFIDENCE)
        if best is None or best_support < cfg.min_support:
            break
        v, v_prime, inl = best
        model = VPModel(v, v_prime, tuple(remaining[k] for k in inl))
        if cfg.refine and len(inl) >= 2:
            model = refine_vp(model, lines, intrinsics)
            inl_global = _joint_inliers(model.v, model.v_prime,
                                        [lines[i] for i in remaining],
                                        cfg.inlier_threshold, intrinsics)
            model = VPModel(model.v, model.v_prime,
                            tuple(remaining[k] for k in inl_global))
        if len(model.inlier_lines) < cfg.min_support:
            break
        models.append(model)
        taken = set(model.inlier_lines)
        remaining = [i for i in remaining if i not in taken]

    models.sort(key=lambda m: -len(m.inlier_lines))
    return models


def required_samples(inlier_ratio, confidence, sample_size=2) -> int:
    if inlier_ratio <= 0.0:
        return MAX_ITERATIONS_PER_MODEL
    p = inlier_ratio ** sample_size
    if p >= 1.0:
        return 1
    return int(math.ceil(math.log(1.0 - confidence) / math.log(1.0 - p)))
