"""Synthetic scenes with known pose, and the benchmark drivers built on them.

Scenes follow a fixed recipe: a uniform random rotation, a Gaussian camera
center (translation t = -R C), points from N((0,0,5), I), line segments as
X_A + lambda d, and vanishing points from projected parallel lines.  Noise of
sigma/f is added per calibrated endpoint coordinate.  Noise normals are drawn
even at sigma = 0 so that runs differing only in sigma share their geometry.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from itertools import product

import numpy as np

from .exceptions import RelposeError
from .geometry import (
    LineMatch,
    PointMatch,
    RelativePose,
    VPMatch,
    cross,
    pose_errors,
    random_rotation,
    unit,
)
from .ransac import CorrespondenceSet, RansacConfig, refine_pose
from .solvers import SolverKind, solve

MIN_DEPTH = 0.1
MIN_SEGMENT_LENGTH = 1e-4
MAX_RETRIES = 40       # per-entity redraws before the whole scene is redrawn
MAX_SCENE_RETRIES = 200

CSV_HEADER = ("experiment", "solver", "sigma", "lines_per_vp", "pt_lo",
              "deviation_deg", "rot_err_deg", "trans_err_deg", "instance_id")


@dataclass(frozen=True)
class SceneConfig:
    """Knobs of the synthetic generator."""

    rng_seed: int = 0
    point_mean_depth: float = 5.0
    point_std: float = 1.0
    focal: float = 1000.0
    noise_sigma: float = 0.0       # pixels
    lines_per_vp: int = 2
    ortho_deviation: float = 0.0   # degrees off the orthogonal direction
    junction_points: bool = False  # points simulated as junctions of noisy lines
    sign_hints: bool = False       # attach VP orientation hints
    min_segment_px: float = 0.1    # segments shorter than this are redrawn


@dataclass(frozen=True, eq=False)
class SyntheticScene:
    gt_pose: RelativePose
    data: CorrespondenceSet
    provenance: dict


class _Degenerate(Exception):
    pass


class _SceneRetry(Exception):
    pass


class _Builder:
    """Stateful helper drawing one scene's entities from a single stream.

    Geometry is drawn and validated noiselessly first; noise normals are
    drawn afterwards so retry decisions never depend on the noise level.
    """

    def __init__(self, cfg: SceneConfig, rng, min_segment=None):
        self.cfg = cfg
        self.rng = rng
        if min_segment is None:
            min_segment = cfg.min_segment_px / cfg.focal
        self.min_segment = min_segment
        self.rotation = random_rotation(rng)
        self.center = rng.standard_normal(3)
        self.t_raw = -self.rotation @ self.center
        self.gt_pose = RelativePose(self.rotation, unit(self.t_raw))

    # -- projection ---------------------------------------------------------

    def _project(self, x3d):
        if x3d[2] < MIN_DEPTH:
            raise _Degenerate
        q = self.rotation @ x3d + self.t_raw
        if q[2] < MIN_DEPTH:
            raise _Degenerate
        return x3d / x3d[2], q / q[2]

    def _noisy(self, p):
        n = self.rng.standard_normal(2) * (self.cfg.noise_sigma / self.cfg.focal)
        return np.array([p[0] + n[0], p[1] + n[1], 1.0])

    def _retry(self, fn, *args, retries=MAX_RETRIES):
        for _ in range(retries):
            try:
                return fn(*args)
            except _Degenerate:
                continue
        # The pose itself is hostile (e.g. the cloud is behind camera 2);
        # the scene-level loop redraws it.
        raise _SceneRetry

    # -- entities -----------------------------------------------------------

    def _draw_point3d(self):
        x = self.rng.standard_normal(3) * self.cfg.point_std
        x[2] += self.cfg.point_mean_depth
        return x

    def point(self) -> PointMatch:
        def attempt():
            x = self._draw_point3d()
            p, q = self._project(x)
            return p, q
        p, q = self._retry(attempt)
        return PointMatch(self._noisy(p), self._noisy(q))

    def point_at(self, x3d) -> PointMatch:
        p, q = self._project(x3d)
        return PointMatch(self._noisy(p), self._noisy(q))

    def junction_point(self) -> PointMatch:
        """A point simulated as the junction of two noisy segments around it."""
        def attempt():
            x = self._draw_point3d()
            d1, d2 = unit(self.rng.standard_normal(3)), unit(self.rng.standard_normal(3))
            lam = self.rng.standard_normal(4)
            ends = [x + lam[0] * d1, x - lam[1] * d1, x + lam[2] * d2, x - lam[3] * d2]
            proj = [self._project(e) for e in ends]
            for pair in ((0, 1), (2, 3)):
                for side in (0, 1):
                    seg = proj[pair[1]][side][:2] - proj[pair[0]][side][:2]
                    if np.hypot(*seg) < MIN_SEGMENT_LENGTH:
                        raise _Degenerate
            return proj
        proj = self._retry(attempt)
        noisy = [(self._noisy(p), self._noisy(q)) for p, q in proj]
        pts = []
        for side in (0, 1):
            l1 = cross(noisy[0][side], noisy[1][side])
            l2 = cross(noisy[2][side], noisy[3][side])
            j = cross(l1, l2)
            if abs(j[2]) < 1e-12:
                raise _SceneRetry
            pts.append(j / j[2])
        return PointMatch(pts[0], pts[1])

    def sample_point(self) -> PointMatch:
        if self.cfg.junction_points:
            return self.junction_point()
        return self.point()

    def _segment(self, x_a, x_b):
        pa, qa = self._project(x_a)
        pb, qb = self._project(x_b)
        if (np.hypot(*(pb - pa)[:2]) < self.min_segment
                or np.hypot(*(qb - qa)[:2]) < self.min_segment):
            raise _Degenerate
        return pa, pb, qa, qb

    def line(self, direction, anchor=None) -> LineMatch:
        def attempt():
            x_a = anchor if anchor is not None else self._draw_point3d()
            lam = self.rng.standard_normal()
            return self._segment(x_a, x_a + lam * direction)
        pa, pb, qa, qb = self._retry(attempt)
        return LineMatch.from_endpoints(
            self._noisy(pa), self._noisy(pb), self._noisy(qa), self._noisy(qb))

    def line_through(self, x3d, direction) -> LineMatch:
        def attempt():
            lam = self.rng.standard_normal(2)
            if abs(lam[0] - lam[1]) < 1e-3:
                raise _Degenerate
            return self._segment(x3d + lam[0] * direction, x3d + lam[1] * direction)
        pa, pb, qa, qb = self._retry(attempt)
        return LineMatch.from_endpoints(
            self._noisy(pa), self._noisy(pb), self._noisy(qa), self._noisy(qb))

    def direction(self):
        return unit(self.rng.standard_normal(3))

    def orthogonal_direction(self, d_vp):
        """Direction at (90 - ortho_deviation) degrees from the VP direction."""
        def attempt():
            d0 = self.rng.standard_normal(3)
            w = cross(d_vp, d0)
            if np.linalg.norm(w) < 1e-6:
                raise _Degenerate
            return unit(w)
        d_perp = self._retry(attempt)
        dev = math.radians(self.cfg.ortho_deviation)
        return math.cos(dev) * d_perp + math.sin(dev) * d_vp

    def vp(self, direction) -> tuple:
        """VP match plus its supporting noisy lines.

        Noiseless scenes intersect two projected parallel lines; noisy ones
        solve the least-squares system over all lines_per_vp lines.
        """
        count = max(2, self.cfg.lines_per_vp)
        lines = [self.line(direction) for _ in range(count)]
        if self.cfg.noise_sigma == 0.0:
            v = vp_from_two_lines(lines[0].l, lines[1].l)
            v_prime = vp_from_two_lines(lines[0].l_prime, lines[1].l_prime)
        else:
            v = vp_least_squares([lm.l for lm in lines])
            v_prime = vp_least_squares([lm.l_prime for lm in lines])
        hint = None
        if self.cfg.sign_hints:
            s = 1 if (self.rotation @ v) @ v_prime >= 0.0 else -1
            hint = (1, s)
        return VPMatch(v, v_prime, sign_hint=hint), lines

    # -- coplanar machinery ---------------------------------------------------

    def plane(self):
        return (self._draw_point3d(), self._draw_point3d(), self._draw_point3d())

    def plane_point3d(self, plane):
        x1, x2, x3 = plane
        def attempt():
            lam = self.rng.standard_normal(2)
            x = x1 + lam[0] * x2 + lam[1] * x3
            self._project(x)  # depth checks
            return x
        return self._retry(attempt)

    def plane_point(self, plane) -> PointMatch:
        return self.point_at(self.plane_point3d(plane))

    def plane_line(self, plane) -> tuple:
        """Line with both endpoints on the plane; also returns the 3D endpoints."""
        def attempt():
            x_a = self.plane_point3d(plane)
            x_b = self.plane_point3d(plane)
            return (x_a, x_b), self._segment(x_a, x_b)
        (x_a, x_b), (pa, pb, qa, qb) = self._retry(attempt)
        lm = LineMatch.from_endpoints(
            self._noisy(pa), self._noisy(pb), self._noisy(qa), self._noisy(qb))
        return lm, (x_a, x_b)

    def coplanar_tuple(self, count) -> list:
        """Coplanar lines whose pairwise 3D intersections are visible.

        Junctions of the tuple are consumed as point matches downstream, so
        tuples whose intersections fall behind a camera are redrawn; that
        mirrors real junctions, which come from segments seen in both images.
        """
        for _ in range(MAX_RETRIES):
            plane = self.plane()
            drawn = [self.plane_line(plane) for _ in range(count)]
            if self._junctions_visible(drawn):
                return [lm for lm, _ in drawn]
        raise _SceneRetry

    def _junctions_visible(self, drawn):
        for i in range(len(drawn)):
            for j in range(i + 1, len(drawn)):
                (_, (a1, b1)), (_, (a2, b2)) = drawn[i], drawn[j]
                u1, u2 = b1 - a1, a2 - b2
                m = np.column_stack([u1, u2])
                rhs = a2 - a1
                sol, res, rank, _ = np.linalg.lstsq(m, rhs, rcond=None)
                if rank < 2:
                    return False
                x = a1 + sol[0] * u1
                if np.linalg.norm(m @ sol - rhs) > 1e-8:
                    return False
                try:
                    self._project(x)
                except _Degenerate:
                    return False
                lm1, lm2 = drawn[i][0], drawn[j][0]
                if (abs(cross(lm1.l, lm2.l)[2]) < 1e-8
                        or abs(cross(lm1.l_prime, lm2.l_prime)[2]) < 1e-8):
                    return False
        return True


def vp_from_two_lines(l1, l2):
    return unit(cross(l1, l2))


def vp_least_squares(lines):
    """Unit minimizer of the stacked line incidence system A v = 0."""
    a = np.array(lines)
    _, _, vt = np.linalg.svd(a)
    return vt[-1]


def sample_scene(kind: SolverKind, cfg: SceneConfig, rng=None,
                 lo_points: int = 0) -> SyntheticScene:
    """One synthetic instance carrying exactly the entities ``kind`` needs.

    ``lo_points`` extra generic point matches are appended after the minimal
    ones for use by local optimization.  Degenerate draws (points behind a
    camera, vanishing image segments, junctions at infinity) are resampled,
    including the pose when an entity repeatedly fails under it.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)
    retries = 0
    for _ in range(MAX_SCENE_RETRIES):
        b = _Builder(cfg, rng)
        try:
            points, lines, vps, prov = _scene_entities(b, kind)
        except _SceneRetry:
            retries += 1
            continue
        prov["n_minimal_points"] = len(points)
        prov["scene_retries"] = retries
        try:
            for _ in range(lo_points):
                points.append(b.point())
        except _SceneRetry:
            retries += 1
            continue
        data = CorrespondenceSet(tuple(points), tuple(lines), tuple(vps))
        return SyntheticScene(b.gt_pose, data, prov)
    raise RuntimeError("synthetic generator exceeded its scene retry budget")


def _scene_entities(b: _Builder, kind: SolverKind):
    n_pts, _, _ = kind.sample_size
    points, lines, vps = [], [], []
    prov = {"kind": kind.value, "noise_sigma": b.cfg.noise_sigma,
            "ortho_deviation": b.cfg.ortho_deviation, "vp_directions": []}

    if kind is SolverKind.P5:
        points = [b.sample_point() for _ in range(5)]
    elif kind.uses_homography:
        plane = b.plane()
        points = [b.plane_point(plane) for _ in range(n_pts)]
        lines = [b.plane_line(plane)[0] for _ in range(4 - n_pts)]
    elif kind is SolverKind.P2L3:
        points = [b.sample_point() for _ in range(2)]
        lines = b.coplanar_tuple(3)
    elif kind is SolverKind.P3V1:
        points = [b.sample_point() for _ in range(3)]
        d = b.direction()
        prov["vp_directions"].append(d.tolist())
        vps = [b.vp(d)[0]]
    elif kind is SolverKind.L3V1:
        lines = b.coplanar_tuple(3)
        d = b.direction()
        prov["vp_directions"].append(d.tolist())
        vps = [b.vp(d)[0]]
    elif kind is SolverKind.P2V2:
        points = [b.sample_point() for _ in range(2)]
        for _ in range(MAX_RETRIES):
            d1, d2 = b.direction(), b.direction()
            if np.linalg.norm(cross(d1, d2)) > 1e-3:
                break
        prov["vp_directions"] = [d1.tolist(), d2.tolist()]
        vps = [b.vp(d1)[0], b.vp(d2)[0]]
    elif kind is SolverKind.P2L1V1_PERP:
        points = [b.sample_point() for _ in range(2)]
        d_vp = b.direction()
        prov["vp_directions"].append(d_vp.tolist())
        vp = b.vp(d_vp)[0]
        def attempt_line():
            lm = b.line(b.orthogonal_direction(d_vp))
            _check_vp_line_collapse(lm.l, lm.l_prime, vp)
            return lm
        lines = [b._retry(attempt_line)]
        vps = [vp]
    elif kind is SolverKind.P1L2V1_PERP:
        points = [b.sample_point()]
        d_vp = b.direction()
        prov["vp_directions"].append(d_vp.tolist())
        vp = b.vp(d_vp)[0]
        x_c = b._retry(lambda: _visible_point(b))
        def attempt_line():
            lm = b.line_through(x_c, b.orthogonal_direction(d_vp))
            _check_vp_line_collapse(lm.l, lm.l_prime, vp)
            return lm
        lines = [b._retry(attempt_line), b.line_through(x_c, b.direction())]
        vps = [vp]
    elif kind is SolverKind.P2V1_PERP:
        d_vp = b.direction()
        prov["vp_directions"].append(d_vp.tolist())
        vp = b.vp(d_vp)[0]
        def attempt():
            x1 = b._draw_point3d()
            lam = b.rng.standard_normal()
            x2 = x1 + lam * b.orthogonal_direction(d_vp)
            pa, pb, qa, qb = b._segment(x1, x2)
            _check_vp_line_collapse(_joining_line(pa, pb), _joining_line(qa, qb), vp)
            return pa, pb, qa, qb
        pa, pb, qa, qb = b._retry(attempt)
        points = [PointMatch(b._noisy(pa), b._noisy(qa)),
                  PointMatch(b._noisy(pb), b._noisy(qb))]
        vps = [vp]
    else:
        raise ValueError(f"unhandled solver kind {kind}")

    return points, lines, vps, prov


def _visible_point(b: _Builder):
    x = b._draw_point3d()
    b._project(x)
    return x


# An image line passing near the VP makes the derived second VP of the
# perpendicular reduction noise-amplified by 1 / |l x v|; such draws count
# as degenerate for the benchmarks.
_VP_LINE_COLLAPSE_MIN = 0.3


def _joining_line(a, b):
    w = cross(a, b)
    return w / np.hypot(w[0], w[1])


def _check_vp_line_collapse(l, l_prime, vp):
    if (np.linalg.norm(cross(l, vp.v)) < _VP_LINE_COLLAPSE_MIN
            or np.linalg.norm(cross(l_prime, vp.v_prime)) < _VP_LINE_COLLAPSE_MIN):
        raise _Degenerate


def sample_pair_scene(n_points, outlier_fraction, n_vps, lines_per_vp,
                      noise_sigma, rng, focal=1000.0) -> SyntheticScene:
    """Image-pair scene for robust estimation tests.

    ``n_points`` point matches of which the trailing ``outlier_fraction``
    share are uniform random mismatches; ``n_vps`` planted VP directions each
    supported by ``lines_per_vp`` noisy line matches.  Unlike the solver
    benchmarks, segments shorter than ~30 px are redrawn: a detector does not
    emit sub-pixel segments, and at 1 px endpoint noise they would reduce the
    planted VPs to garbage.
    """
    cfg = SceneConfig(noise_sigma=noise_sigma, lines_per_vp=lines_per_vp, focal=focal)
    for _ in range(MAX_SCENE_RETRIES):
        b = _Builder(cfg, rng, min_segment=30.0 / focal)
        try:
            n_out = int(round(n_points * outlier_fraction))
            points = [b.point() for _ in range(n_points - n_out)]
            for _ in range(n_out):
                xy1 = rng.uniform(-0.4, 0.4, 2)
                xy2 = rng.uniform(-0.4, 0.4, 2)
                points.append(PointMatch(np.array([*xy1, 1.0]),
                                         np.array([*xy2, 1.0])))
            lines, vps = [], []
            for _ in range(n_vps):
                d = b.direction()
                vm, support = b.vp(d)
                idx = tuple(range(len(lines), len(lines) + len(support)))
                lines.extend(support)
                vps.append(VPMatch(vm.v, vm.v_prime, supporting_lines=idx))
        except _SceneRetry:
            continue
        data = CorrespondenceSet(tuple(points), tuple(lines), tuple(vps))
        prov = {"n_outliers": n_out, "n_points": n_points, "noise_sigma": noise_sigma}
        return SyntheticScene(b.gt_pose, data, prov)
    raise RuntimeError("synthetic generator exceeded its scene retry budget")


# --- experiment drivers ----------------------------------------------------


@dataclass
class ExperimentCell:
    """All instances of one (experiment, solver, parameter) combination."""

    experiment: str
    solver: str
    sigma: float
    lines_per_vp: int
    pt_lo: int
    deviation_deg: float
    rot_err_deg: np.ndarray
    trans_err_deg: np.ndarray


def best_candidate_errors(gt_pose, candidates) -> tuple:
    """Errors of the candidate closest to ground truth (by the worse angle)."""
    best = (math.pi, math.pi)
    best_key = math.inf
    for cand in candidates:
        rot, trans = pose_errors(cand, gt_pose)
        key = max(rot, trans)
        if key < best_key:
            best_key = key
            best = (rot, trans)
    return best


def _solve_instance(kind, cfg, seed_key, lo_points, lo_threshold=None):
    rng = np.random.default_rng(seed_key)
    scene = sample_scene(kind, cfg, rng, lo_points=lo_points)
    n_pts = scene.provenance["n_minimal_points"]
    pts = list(scene.data.points[:n_pts])
    try:
        result = solve(kind, pts, scene.data.lines, scene.data.vps)
        candidates = result.candidates
    except (RelposeError, np.linalg.LinAlgError):
        candidates = []
    if not candidates:
        return math.pi, math.pi
    rot, trans = best_candidate_errors(scene.gt_pose, candidates)
    if lo_points > 0:
        best = min(candidates,
                   key=lambda c: max(pose_errors(c, scene.gt_pose)))
        # The benchmark scenes carry no outliers, so local optimization is a
        # plain least squares: the truncation threshold sits far above any
        # noise level and every residual stays active even from a poor start.
        rcfg = RansacConfig(point_threshold=lo_threshold or 0.05,
                            use_junctions=False, use_endpoints=False)
        inliers = (tuple(range(len(scene.data.points))),
                   tuple(range(len(scene.data.vps))))
        refined = refine_pose(best, scene.data, inliers, rcfg)
        rot, trans = pose_errors(refined, scene.gt_pose)
    return rot, trans


def _cell_chunk(args):
    kind_value, cfg, seed, start, stop, lo_points = args
    kind = SolverKind(kind_value)
    kind_ord = list(SolverKind).index(kind)
    rot = np.empty(stop - start)
    trans = np.empty(stop - start)
    for i in range(start, stop):
        key = (seed, kind_ord, cfg.lines_per_vp, lo_points,
               int(round(cfg.ortho_deviation * 1000)), i)
        rot[i - start], trans[i - start] = _solve_instance(kind, cfg, key, lo_points)
    return rot, trans


def _run_cell(experiment, kind, cfg, seed, n, lo_points) -> ExperimentCell:
    workers = min(worker_count(), max(1, n // 256))
    if workers <= 1:
        rot, trans = _cell_chunk((kind.value, cfg, seed, 0, n, lo_points))
    else:
        import multiprocessing as mp
        bounds = np.linspace(0, n, workers + 1).astype(int)
        jobs = [(kind.value, cfg, seed, int(bounds[w]), int(bounds[w + 1]), lo_points)
                for w in range(workers)]
        with mp.Pool(workers) as pool:
            parts = pool.map(_cell_chunk, jobs)
        rot = np.concatenate([p[0] for p in parts])
        trans = np.concatenate([p[1] for p in parts])
    return ExperimentCell(experiment, kind.value, cfg.noise_sigma,
                          cfg.lines_per_vp, lo_points, cfg.ortho_deviation,
                          np.degrees(rot), np.degrees(trans))


def worker_count() -> int:
    env = os.environ.get("RELPOSE_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_stability_experiment(kinds, n, seed) -> list:
    """Noiseless error distributions: one cell of n instances per solver."""
    cells = []
    for kind in kinds:
        cfg = SceneConfig(noise_sigma=0.0, lines_per_vp=2)
        cells.append(_run_cell("stability", kind, cfg, seed, n, 0))
    return cells


def run_noise_experiment(kinds, sigmas, lines_per_vp_values, n,
                         with_lo=False, points_in_lo=(0,), seed=0) -> list:
    """Mean-error grid over noise level, lines per VP, and LO point count.

    The instance streams are keyed without sigma, so cells differing only in
    sigma share geometry and noise directions.
    """
    lo_values = tuple(points_in_lo) if with_lo else (0,)
    cells = []
    for kind, lvp, pt_lo, sigma in product(kinds, lines_per_vp_values,
                                           lo_values, sigmas):
        cfg = SceneConfig(noise_sigma=float(sigma), lines_per_vp=int(lvp))
        cells.append(_run_cell("noise", kind, cfg, seed, n, pt_lo))
    return cells


ORTHO_KINDS = (SolverKind.P2L1V1_PERP, SolverKind.P1L2V1_PERP, SolverKind.P2V1_PERP)


def run_orthogonality_experiment(deviations, n, with_lo=True, seed=0,
                                 sigma=1.0, lines_per_vp=10,
                                 points_in_lo=4, min_segment_px=30.0) -> list:
    """Error of the perpendicular solvers vs. deviation from orthogonality.

    sigma, lines_per_vp, points_in_lo, and the detector-like segment length
    floor are harness defaults, not reported protocol values.
    """
    cells = []
    for kind, dev in product(ORTHO_KINDS, deviations):
        cfg = SceneConfig(noise_sigma=float(sigma), lines_per_vp=int(lines_per_vp),
                          ortho_deviation=float(dev),
                          min_segment_px=float(min_segment_px))
        cells.append(_run_cell("ortho", kind, cfg, seed, n,
                               points_in_lo if with_lo else 0))
    return cells


def write_cells_csv(cells, stream) -> None:
    """One row per instance, floats in shortest round-trip form."""
    stream.write(",".join(CSV_HEADER) + "\n")
    for cell in cells:
        prefix = (f"{cell.experiment},{cell.solver},{float(cell.sigma)!r},"
                  f"{cell.lines_per_vp},{cell.pt_lo},{float(cell.deviation_deg)!r}")
        for i in range(len(cell.rot_err_deg)):
            stream.write(f"{prefix},{float(cell.rot_err_deg[i])!r},"
                         f"{float(cell.trans_err_deg[i])!r},{i}\n")
