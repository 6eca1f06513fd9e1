"""Calibrated two-view primitives: poses, correspondences, and residuals.

All types store calibrated (normalized image plane) coordinates; intrinsics
appear only at the ingestion boundary.  Operations are pure functions on
immutable values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import CalibrationError, NearParallel

# Tolerances shared across the package.
ALGEBRA_TOL = 1e-12    # orthonormality, unit norms
CONSTRAINT_TOL = 1e-10  # epipolar / VP constraint residuals on noiseless data
PARALLEL_TOL = 1e-9    # cross-product magnitude below which lines count as parallel

_Y_AXIS = np.array([0.0, 1.0, 0.0])


def cross(a, b):
    """Cross product of two 3-vectors (faster than np.cross for scalars)."""
    return np.array([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def unit(v):
    """v scaled to unit norm."""
    return v / np.linalg.norm(v)


def skew(v):
    """3x3 cross-product matrix [v]x such that [v]x w = v x w."""
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


@dataclass(frozen=True, eq=False)
class RelativePose:
    """Rotation in SO(3) plus a unit-norm translation direction.

    Scale is unobservable in two-view geometry, so only the translation
    direction is kept.  Pure-rotation poses (zero baseline) carry the reserved
    direction (1, 0, 0) and set ``pure_rotation``.
    """

    rotation: np.ndarray
    translation: np.ndarray
    pure_rotation: bool = False

    @classmethod
    def checked(cls, rotation, translation, pure_rotation=False) -> "RelativePose":
        """Construct after validating the SO(3) and unit-norm invariants."""
        rotation = np.asarray(rotation, dtype=float)
        translation = np.asarray(translation, dtype=float)
        if np.abs(rotation.T @ rotation - np.eye(3)).max() > 1e-9:
            raise ValueError("rotation is not orthonormal")
        if np.linalg.det(rotation) < 0.0:
            raise ValueError("rotation has negative determinant")
        n = np.linalg.norm(translation)
        if n == 0.0:
            raise ValueError("translation direction cannot be zero")
        return cls(rotation, translation / n, pure_rotation)


@dataclass(frozen=True, eq=False)
class PointMatch:
    """Homogeneous calibrated point pair with third component 1."""

    p: np.ndarray
    p_prime: np.ndarray

    @classmethod
    def from_homogeneous(cls, p, p_prime) -> "PointMatch":
        """Dehomogenize arbitrary-scale representatives to the z=1 plane."""
        p = np.asarray(p, dtype=float)
        p_prime = np.asarray(p_prime, dtype=float)
        return cls(p / p[2], p_prime / p_prime[2])


def _normalize_line(l):
    """Scale a homogeneous line so its first two components have unit norm."""
    n = np.hypot(l[0], l[1])
    return l / n


@dataclass(frozen=True, eq=False)
class LineMatch:
    """Homogeneous calibrated line pair plus the segment endpoints.

    Lines are scaled so that the norm of their first two components is 1;
    endpoints live on the z=1 plane and are kept for inlier tests and for the
    vanishing-point distance.
    """

    l: np.ndarray
    l_prime: np.ndarray
    a: np.ndarray
    b: np.ndarray
    a_prime: np.ndarray
    b_prime: np.ndarray

    @classmethod
    def from_endpoints(cls, a, b, a_prime, b_prime) -> "LineMatch":
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        a_prime = np.asarray(a_prime, dtype=float)
        b_prime = np.asarray(b_prime, dtype=float)
        return cls(
            _normalize_line(cross(a, b)),
            _normalize_line(cross(a_prime, b_prime)),
            a, b, a_prime, b_prime,
        )


@dataclass(frozen=True, eq=False)
class VPMatch:
    """Unit vanishing point directions in both images.

    ``sign_hint`` optionally carries one orientation bit per image, derived
    from the order of the supporting lines; their product fixes which branch
    of v' = +/- R v holds.
    """

    v: np.ndarray
    v_prime: np.ndarray
    supporting_lines: tuple = ()
    sign_hint: tuple | None = None

    @classmethod
    def from_directions(cls, v, v_prime, supporting_lines=(), sign_hint=None) -> "VPMatch":
        return cls(unit(np.asarray(v, dtype=float)),
                   unit(np.asarray(v_prime, dtype=float)),
                   tuple(supporting_lines), sign_hint)

    def relative_sign(self):
        """+1/-1 when the hint fixes the branch of v' = +/- R v, else None."""
        if self.sign_hint is None:
            return None
        return self.sign_hint[0] * self.sign_hint[1]


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    skew: float = 0.0

    def __post_init__(self):
        if not (self.fx > 0.0 and self.fy > 0.0):
            raise CalibrationError(
                f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([
            [self.fx, self.skew, self.cx],
            [0.0, self.fy, self.cy],
            [0.0, 0.0, 1.0],
        ])

    def calibrate(self, xy) -> np.ndarray:
        """Pixel coordinates -> homogeneous calibrated point with z = 1."""
        x, y = xy[0], xy[1]
        yn = (y - self.cy) / self.fy
        xn = (x - self.cx - self.skew * yn) / self.fx
        return np.array([xn, yn, 1.0])

    def to_pixels(self, p) -> np.ndarray:
        """Calibrated homogeneous point -> pixel coordinates (x, y)."""
        q = self.matrix @ p
        return q[:2] / q[2]


def essential_from_pose(pose: RelativePose) -> np.ndarray:
    """Essential matrix [t]x R of a relative pose."""
    return skew(pose.translation) @ pose.rotation


def sampson_distance(e_matrix, p, p_prime) -> float:
    """First-order geometric error of a point pair under an essential matrix."""
    ep = e_matrix @ p
    etp = e_matrix.T @ p_prime
    c = p_prime @ ep
    d = ep[0] * ep[0] + ep[1] * ep[1] + etp[0] * etp[0] + etp[1] * etp[1]
    if d == 0.0:
        return 0.0 if c == 0.0 else np.inf
    return abs(c) / np.sqrt(d)


def sampson_distances(e_matrix, ps, ps_prime) -> np.ndarray:
    """Vectorized Sampson distances for (N,3) point arrays."""
    ep = ps @ e_matrix.T
    etp = ps_prime @ e_matrix
    c = np.einsum("ij,ij->i", ps_prime, ep)
    d = ep[:, 0] ** 2 + ep[:, 1] ** 2 + etp[:, 0] ** 2 + etp[:, 1] ** 2
    out = np.empty(len(c))
    ok = d > 0.0
    out[ok] = np.abs(c[ok]) / np.sqrt(d[ok])
    out[~ok] = np.where(c[~ok] == 0.0, 0.0, np.inf)
    return out


def epipolar_residual(pose: RelativePose, m: PointMatch) -> float:
    """Sampson distance of a point match under the pose's essential matrix."""
    return sampson_distance(essential_from_pose(pose), m.p, m.p_prime)


def vp_rotation_residual(pose: RelativePose, vm: VPMatch) -> float:
    """Angle in [0, pi/2] between v' and the closer of +/- R v."""
    rv = pose.rotation @ vm.v
    c = abs(vm.v_prime @ rv)
    s = np.linalg.norm(cross(vm.v_prime, rv))
    return float(np.arctan2(s, c))


def vp_rotation_residuals(rotation, vs, vs_prime) -> np.ndarray:
    """Vectorized VP residuals for (N,3) unit direction arrays."""
    rv = vs @ rotation.T
    c = np.abs(np.einsum("ij,ij->i", vs_prime, rv))
    s = np.linalg.norm(np.cross(vs_prime, rv), axis=-1)
    return np.arctan2(s, c)


def rotation_to_axis(x) -> np.ndarray:
    """Rotation taking the unit vector x onto the y-axis (0, 1, 0).

    For x in the lower hemisphere the rotation is built for -x and composed
    with the half-turn about z, which keeps the 1/(1 + cos) factor away from
    its singularity; x = -(0,1,0) thereby maps to that half-turn itself.
    """
    c = x[1]  # x . y-axis
    if c < 0.0:
        return np.diag([-1.0, -1.0, 1.0]) @ rotation_to_axis(-np.asarray(x))
    k = skew(cross(x, _Y_AXIS))
    return np.eye(3) + k + (k @ k) / (1.0 + c)


def rotation_about_y(phi: float) -> np.ndarray:
    """Rotation about the y-axis in the convention used by the upright solver."""
    c, s = np.cos(phi), np.sin(phi)
    return np.array([
        [c, 0.0, -s],
        [0.0, 1.0, 0.0],
        [s, 0.0, c],
    ])


def so3_exp(w) -> np.ndarray:
    """Exponential map of a rotation tangent vector."""
    theta = np.linalg.norm(w)
    k = skew(w)
    if theta < 1e-9:
        return np.eye(3) + k + 0.5 * (k @ k)
    return (np.eye(3) + (np.sin(theta) / theta) * k
            + ((1.0 - np.cos(theta)) / theta ** 2) * (k @ k))


def rotation_angle(rotation) -> float:
    """Angle of a rotation matrix in [0, pi].

    atan2 of the skew part against the trace keeps full precision for tiny
    angles, where arccos((tr-1)/2) collapses to zero.
    """
    s = 0.5 * np.sqrt(
        (rotation[2, 1] - rotation[1, 2]) ** 2
        + (rotation[0, 2] - rotation[2, 0]) ** 2
        + (rotation[1, 0] - rotation[0, 1]) ** 2)
    c = (np.trace(rotation) - 1.0) / 2.0
    return float(np.arctan2(s, c))


def angle_between(u, v) -> float:
    """Angle between two unit vectors, precise near 0 and pi."""
    return float(np.arctan2(np.linalg.norm(cross(u, v)), u @ v))


def pose_errors(estimated: RelativePose, truth: RelativePose) -> tuple:
    """(rotation error, translation error) in radians.

    The rotation error is the angle of R_est^T R_true; the translation error
    is the signed angle between the two unit directions (no up-to-sign
    folding, so t_est = -t_true scores pi).
    """
    rot_err = rotation_angle(estimated.rotation.T @ truth.rotation)
    return rot_err, angle_between(estimated.translation, truth.translation)


def line_line_junction(a: LineMatch, b: LineMatch) -> PointMatch:
    """Intersection of two line matches as a point match.

    Raises NearParallel when the intersection is at or near infinity in
    either image.
    """
    pa = cross(a.l, b.l)
    pb = cross(a.l_prime, b.l_prime)
    if abs(pa[2]) < PARALLEL_TOL or abs(pb[2]) < PARALLEL_TOL:
        raise NearParallel("junction at infinity: lines are near-parallel")
    return PointMatch(pa / pa[2], pb / pb[2])


def tangent_basis(v) -> np.ndarray:
    """Deterministic orthonormal basis (3x2) of the plane orthogonal to unit v."""
    e = np.zeros(3)
    e[int(np.argmin(np.abs(v)))] = 1.0
    b1 = unit(cross(v, e))
    b2 = cross(v, b1)
    return np.column_stack([b1, b2])


def triangulate_depths(rotation, translation, p, p_prime) -> tuple:
    """Depths of the 3D point behind a correspondence in both cameras.

    Closed form from z (R p) x p' + t x p' = 0; cheap enough for per-candidate
    cheirality voting.
    """
    w = cross(rotation @ p, p_prime)
    ww = w @ w
    if ww < 1e-30:
        return 0.0, 0.0
    z = -(w @ cross(translation, p_prime)) / ww
    z2 = z * (rotation[2] @ p) + translation[2]
    return float(z), float(z2)


def random_rotation(rng) -> np.ndarray:
    """Uniformly distributed rotation from a normalized Gaussian quaternion."""
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])
