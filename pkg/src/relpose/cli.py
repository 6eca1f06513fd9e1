"""Command-line entry point: pair-file ingestion, estimation, and benchmarks.

Exit codes: 0 success, 1 usage error, 2 insufficient data, 3 estimation
failure.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    CalibrationError,
    EstimationFailed,
    InsufficientData,
    ParseError,
)
from .geometry import CameraIntrinsics, LineMatch, PointMatch, RelativePose, VPMatch, unit
from .ransac import CorrespondenceSet, RansacConfig, run_hybrid_ransac
from .solvers import SolverKind
from .synth import (
    SyntheticScene,
    run_noise_experiment,
    run_orthogonality_experiment,
    run_stability_experiment,
    write_cells_csv,
)
from .vps import VPFitConfig, fit_vps_jointly

SCHEMA_VERSION = 1


@dataclass(frozen=True, eq=False)
class PairFile:
    """Raw (pixel-space) contents of a correspondence file."""

    intrinsics: tuple
    points: list
    lines: list
    vps: list | None


def load_pair_file(path: str) -> PairFile:
    try:
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    try:
        intr = tuple(
            CameraIntrinsics(k["fx"], k["fy"], k["cx"], k["cy"], k.get("skew", 0.0))
            for k in raw["intrinsics"])
        if len(intr) != 2:
            raise ParseError(f"{path}: expected 2 intrinsics entries")
        points = [(np.asarray(p["p"], float), np.asarray(p["p2"], float))
                  for p in raw.get("points", [])]
        lines = [tuple(np.asarray(l[k], float) for k in ("a", "b", "a2", "b2"))
                 for l in raw.get("lines", [])]
        vps = None
        if raw.get("vps") is not None:
            vps = [(np.asarray(v["v"], float), np.asarray(v["v2"], float),
                    tuple(v.get("lines", ()))) for v in raw["vps"]]
    except CalibrationError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: malformed pair file ({exc})") from exc
    for pts in points:
        if not all(np.isfinite(p).all() for p in pts):
            raise ParseError(f"{path}: non-finite point coordinates")
    return PairFile(intr, points, lines, vps)


def ingest(source, use_junctions=True, use_endpoints=True,
           fit_cfg: VPFitConfig | None = None) -> CorrespondenceSet:
    """Calibrate a pair file into a CorrespondenceSet.

    ``source`` is a path or an already loaded PairFile.  Pixel entities are
    premultiplied by the inverse intrinsics; lines are recomputed from their
    calibrated endpoints.  When the file carries no VPs they are fitted from
    the calibrated lines (seeded via ``fit_cfg``).
    """
    pf = source if isinstance(source, PairFile) else load_pair_file(str(source))
    k1, k2 = pf.intrinsics
    points = [PointMatch(k1.calibrate(p), k2.calibrate(p2)) for p, p2 in pf.points]
    lines = [LineMatch.from_endpoints(k1.calibrate(a), k1.calibrate(b),
                                      k2.calibrate(a2), k2.calibrate(b2))
             for a, b, a2, b2 in pf.lines]
    if pf.vps is not None:
        vps = [VPMatch(unit(np.linalg.inv(k1.matrix) @ v),
                       unit(np.linalg.inv(k2.matrix) @ v2),
                       supporting_lines=idx)
               for v, v2, idx in pf.vps]
    else:
        models = fit_vps_jointly(lines, fit_cfg or VPFitConfig(), (k1, k2))
        vps = [VPMatch(m.v, m.v_prime, supporting_lines=m.inlier_lines)
               for m in models]
    return CorrespondenceSet.build(points, lines, vps,
                                   derive_junctions=use_junctions,
                                   derive_endpoints=use_endpoints)


def pairfile_dict_from_scene(scene: SyntheticScene, focal=1000.0) -> dict:
    """Export a synthetic scene in the pair-file schema (pixel units)."""
    k = CameraIntrinsics(focal, focal, 0.0, 0.0)
    km = k.matrix

    def px(p):
        return [float(x) for x in k.to_pixels(p)]

    doc = {
        "schema_version": SCHEMA_VERSION,
        "intrinsics": [
            {"fx": k.fx, "fy": k.fy, "cx": k.cx, "cy": k.cy, "skew": k.skew}
            for _ in range(2)],
        "points": [{"p": px(m.p), "p2": px(m.p_prime)} for m in scene.data.points],
        "lines": [{"a": px(m.a), "b": px(m.b),
                   "a2": px(m.a_prime), "b2": px(m.b_prime)}
                  for m in scene.data.lines],
    }
    if scene.data.vps:
        doc["vps"] = [{"v": [float(x) for x in km @ m.v],
                       "v2": [float(x) for x in km @ m.v_prime],
                       "lines": list(m.supporting_lines)}
                      for m in scene.data.vps]
    return doc


def quaternion_wxyz(rotation) -> list:
    """Unit quaternion (w, x, y, z) with w >= 0."""
    m = rotation
    tr = np.trace(m)
    if tr > 0.0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array([0.25 * s, (m[2, 1] - m[1, 2]) / s,
                      (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s])
    else:
        i = int(np.argmax(np.diag(m)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(max(1.0 + m[i, i] - m[j, j] - m[k, k], 0.0)) * 2.0
        q = np.empty(4)
        q[0] = (m[k, j] - m[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (m[j, i] + m[i, j]) / s
        q[1 + k] = (m[k, i] + m[i, k]) / s
    q = q / np.linalg.norm(q)
    if q[0] < 0.0 or (q[0] == 0.0 and (q[np.nonzero(q)[0][0]] < 0.0 if q.any() else False)):
        q = -q
    return [float(x) for x in q]


def _json_number(x):
    return None if not np.isfinite(x) else float(x)


def report_to_dict(report) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "pose": {
            "quaternion": quaternion_wxyz(report.best_pose.rotation),
            "translation": [float(x) for x in report.best_pose.translation],
            "pure_rotation": bool(report.best_pose.pure_rotation),
        },
        "score": _json_number(report.score),
        "iterations": report.iterations,
        "terminated_by": report.terminated_by,
        "point_inliers": list(report.point_inliers),
        "vp_inliers": list(report.vp_inliers),
        "per_solver_stats": {
            kind.value: {"draws": st.draws, "successes": st.successes,
                         "best_score": _json_number(st.best_score)}
            for kind, st in report.per_solver_stats.items()},
    }


def _parse_solvers(text):
    if not text:
        return frozenset(SolverKind)
    return frozenset(SolverKind.parse(tok) for tok in text.split(","))


def _mean_focal(intrinsics):
    k1, k2 = intrinsics
    return (k1.fx + k1.fy + k2.fx + k2.fy) / 4.0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="relpose",
                     description="Two-view relative pose from points, lines, and VPs")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate the pose of one pair file")
    est.add_argument("pair", help="path to a pair JSON file")
    est.add_argument("--solvers", default="", help="comma-separated solver kinds")
    est.add_argument("--seed", type=int, default=0)
    est.add_argument("--confidence", type=float, default=0.9999)
    est.add_argument("--point-thresh-px", type=float, default=1.5)
    est.add_argument("--vp-thresh-deg", type=float, default=2.0)
    est.add_argument("--no-junctions", action="store_true")
    est.add_argument("--no-endpoints", action="store_true")
    est.add_argument("--max-iters", type=int, default=5000)
    est.add_argument("--output", default=None)

    bench = sub.add_parser("bench", help="synthetic benchmark drivers")
    bsub = bench.add_subparsers(dest="bench_command", required=True)

    st = bsub.add_parser("stability", help="noiseless error histograms")
    st.add_argument("--solvers", default="")
    st.add_argument("--n", type=int, default=1000)
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--output", default=None)

    nz = bsub.add_parser("noise", help="error vs. image noise and lines per VP")
    nz.add_argument("--solvers", default="")
    nz.add_argument("--sigmas", default="0,0.5,1,2")
    nz.add_argument("--lines-per-vp", default="10")
    nz.add_argument("--n", type=int, default=1000)
    nz.add_argument("--lo", action="store_true")
    nz.add_argument("--pt-lo", default="4")
    nz.add_argument("--seed", type=int, default=0)
    nz.add_argument("--output", default=None)

    ortho = bsub.add_parser("ortho", help="error vs. deviation from orthogonality")
    ortho.add_argument("--deviations", default="0,5,10")
    ortho.add_argument("--n", type=int, default=1000)
    ortho.add_argument("--lo", dest="lo", action="store_true", default=True)
    ortho.add_argument("--no-lo", dest="lo", action="store_false")
    ortho.add_argument("--sigma", type=float, default=1.0)
    ortho.add_argument("--lines-per-vp", type=int, default=10)
    ortho.add_argument("--pt-lo", type=int, default=4)
    ortho.add_argument("--seed", type=int, default=0)
    ortho.add_argument("--output", default=None)
    return parser


def _write_output(text, output):
    if output:
        with open(output, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _csv_list(text, cast=float):
    return [cast(tok) for tok in text.split(",") if tok != ""]


def cmd_estimate(args) -> int:
    pf = load_pair_file(args.pair)
    data = ingest(pf, use_junctions=not args.no_junctions,
                  use_endpoints=not args.no_endpoints,
                  fit_cfg=VPFitConfig(rng_seed=args.seed))
    focal = _mean_focal(pf.intrinsics)
    cfg = RansacConfig(
        point_threshold=args.point_thresh_px / focal,
        vp_threshold=np.radians(args.vp_thresh_deg),
        confidence=args.confidence,
        max_iterations=args.max_iters,
        rng_seed=args.seed,
        enabled_solvers=_parse_solvers(args.solvers),
        use_junctions=not args.no_junctions,
        use_endpoints=not args.no_endpoints,
    )
    report = run_hybrid_ransac(data, cfg)
    stats = {k: v for k, v in report.per_solver_stats.items()
             if k in cfg.enabled_solvers}
    report.per_solver_stats = stats
    _write_output(json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n",
                  args.output)
    return 0


def cmd_bench(args) -> int:
    kinds = sorted(_parse_solvers(getattr(args, "solvers", "")),
                   key=lambda k: list(SolverKind).index(k))
    if args.bench_command == "stability":
        cells = run_stability_experiment(kinds, args.n, args.seed)
    elif args.bench_command == "noise":
        cells = run_noise_experiment(
            kinds, _csv_list(args.sigmas), _csv_list(args.lines_per_vp, int),
            args.n, with_lo=args.lo, points_in_lo=_csv_list(args.pt_lo, int),
            seed=args.seed)
    else:
        cells = run_orthogonality_experiment(
            _csv_list(args.deviations), args.n, with_lo=args.lo, seed=args.seed,
            sigma=args.sigma, lines_per_vp=args.lines_per_vp,
            points_in_lo=args.pt_lo)
    buf = io.StringIO()
    write_cells_csv(cells, buf)
    _write_output(buf.getvalue(), args.output)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        if args.command == "estimate":
            return cmd_estimate(args)
        return cmd_bench(args)
    except (ParseError, CalibrationError, ValueError) as exc:
        print(f"relpose: {exc}", file=sys.stderr)
        return 1
    except InsufficientData as exc:
        print(f"relpose: {exc}", file=sys.stderr)
        return 2
    except EstimationFailed as exc:
        print(f"relpose: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
