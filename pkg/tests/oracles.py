"""Independent oracles used to freeze expected values in the tests.

Each oracle computes its quantity by a route different from the library code
it checks: constrained Newton for geometric corrections, the plane-normal
elimination determinant for coplanarity, and plain point-to-line geometry
for the VP distance.
"""

import numpy as np

from relpose.geometry import cross, skew


def min_geometric_correction(e_matrix, p, p_prime, iterations=50):
    """Smallest joint image correction making a pair epipolar-consistent.

    Minimizes ||d||^2 over 4D corrections d = (dp_xy, dp'_xy) subject to
    (p'+d') E (p+d) = 0, by Newton iterations on the KKT system.  Serves as
    the geometric reference for the first-order Sampson distance.
    """
    x = np.zeros(4)

    def constraint(d):
        pp = p + np.array([d[0], d[1], 0.0])
        qq = p_prime + np.array([d[2], d[3], 0.0])
        return qq @ e_matrix @ pp

    def grad(d):
        pp = p + np.array([d[0], d[1], 0.0])
        qq = p_prime + np.array([d[2], d[3], 0.0])
        gp = e_matrix.T @ qq
        gq = e_matrix @ pp
        return np.array([gp[0], gp[1], gq[0], gq[1]])

    lam = 0.0
    for _ in range(iterations):
        c = constraint(x)
        g = grad(x)
        # KKT: x + lam * g = 0, c(x) = 0; linearize around current (x, lam).
        # Hessian of the Lagrangian: I + lam * d2c; d2c couples dp and dp'.
        h = np.eye(4)
        h[0, 2] += lam * e_matrix[0, 0]
        h[0, 3] += lam * e_matrix[1, 0]
        h[1, 2] += lam * e_matrix[0, 1]
        h[1, 3] += lam * e_matrix[1, 1]
        h[2, 0] += lam * e_matrix[0, 0]
        h[2, 1] += lam * e_matrix[0, 1]
        h[3, 0] += lam * e_matrix[1, 0]
        h[3, 1] += lam * e_matrix[1, 1]
        kkt = np.zeros((5, 5))
        kkt[:4, :4] = h
        kkt[:4, 4] = g
        kkt[4, :4] = g
        rhs = -np.concatenate([x + lam * g, [c]])
        try:
            step = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError:
            break
        x = x + step[:4]
        lam = lam + step[4]
        if np.linalg.norm(step) < 1e-15:
            break
    return np.linalg.norm(x)


def _coplanarity_det_signed(rotation, translation, line_a, line_b):
    """Signed det A(R, t) of the plane-normal elimination system.

    Two coplanar line matches satisfy l ~ (R^T - n t^T) l' for a common
    normal n; writing the cross-product constraints as A(R,t) [n; 1] = 0 with
    A in R^4x4 (two strongest rows per line at the reference pose, each row
    unit-normalized), the determinant vanishes exactly when a consistent n
    exists.
    """
    blocks = []
    for lm in (line_a, line_b):
        m = -(translation @ lm.l_prime) * skew(lm.l)
        b = cross(lm.l, rotation.T @ lm.l_prime)
        rows = np.hstack([m, b[:, None]])
        norms = np.linalg.norm(rows, axis=1)
        order = np.argsort(-norms)[:2]
        for k in order:
            blocks.append(rows[k] / max(norms[k], 1e-300))
    return np.linalg.det(np.array(blocks))


def coplanarity_determinant(rotation, translation, line_a, line_b):
    """|det A(R, t)| of the plane-normal elimination system."""
    return abs(_coplanarity_det_signed(rotation, translation, line_a, line_b))


def coplanarity_residual(pose, line_a, line_b, eps=1e-6):
    """Gradient-normalized determinant residual of the coplanarity system.

    |det A| divided by the norm of its gradient over the 5-parameter pose
    chart: the first-order distance from the pose to the coplanarity variety,
    directly comparable with the junction Sampson distance.
    """
    from relpose.geometry import so3_exp, tangent_basis, unit

    def value(delta):
        rot = pose.rotation @ so3_exp(delta[:3])
        t = unit(pose.translation + tangent_basis(pose.translation) @ delta[3:5])
        return _coplanarity_det_signed(rot, t, line_a, line_b)

    val = value(np.zeros(5))
    grad = np.empty(5)
    for j in range(5):
        step = np.zeros(5)
        step[j] = eps
        grad[j] = (value(step) - value(-step)) / (2 * eps)
    return abs(val) / max(np.linalg.norm(grad), 1e-300)


def point_to_line_distance(point_xy, line_point_a, line_point_b):
    """Plain 2D distance from a point to the line through two points."""
    d = line_point_b - line_point_a
    n = np.array([-d[1], d[0]])
    n = n / np.linalg.norm(n)
    return abs((point_xy - line_point_a) @ n)


def numeric_jacobian(f, x0, eps=1e-6):
    """Central-difference Jacobian of a vector function."""
    f0 = np.atleast_1d(f(x0))
    jac = np.empty((len(f0), len(x0)))
    for j in range(len(x0)):
        step = np.zeros(len(x0))
        step[j] = eps
        jac[:, j] = (np.atleast_1d(f(x0 + step)) - np.atleast_1d(f(x0 - step))) / (2 * eps)
    return jac


def scene_max_residual(scene):
    """Largest constraint violation of a scene under its ground-truth pose.

    Points are checked with the raw epipolar form, line endpoints against the
    matched line, and VPs against the rotation constraint.
    """
    from relpose.geometry import essential_from_pose, vp_rotation_residual

    e_matrix = essential_from_pose(scene.gt_pose)
    worst = 0.0
    for m in scene.data.points:
        worst = max(worst, abs(m.p_prime @ e_matrix @ m.p))
    for lm in scene.data.lines:
        # stored endpoints lie on their line, and the synthetic endpoint
        # pairs are themselves exact correspondences
        for end, line in ((lm.a, lm.l), (lm.b, lm.l),
                          (lm.a_prime, lm.l_prime), (lm.b_prime, lm.l_prime)):
            worst = max(worst, abs(end @ line))
        for end, end2 in ((lm.a, lm.a_prime), (lm.b, lm.b_prime)):
            worst = max(worst, abs(end2 @ e_matrix @ end))
    for vm in scene.data.vps:
        worst = max(worst, vp_rotation_residual(scene.gt_pose, vm))
    return worst
