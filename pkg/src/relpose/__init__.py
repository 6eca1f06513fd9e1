"""Calibrated two-view relative pose from points, lines, and vanishing points."""

from .exceptions import (
    CalibrationError,
    CoincidentPoints,
    DegenerateSample,
    EstimationFailed,
    InsufficientData,
    NearParallel,
    NoRealRoot,
    ParallelVPs,
    ParseError,
    RankDeficientA,
    RelposeError,
)
from .geometry import (
    CameraIntrinsics,
    LineMatch,
    PointMatch,
    RelativePose,
    VPMatch,
    epipolar_residual,
    essential_from_pose,
    line_line_junction,
    pose_errors,
    rotation_to_axis,
    vp_rotation_residual,
)
from .ransac import (
    CorrespondenceSet,
    RansacConfig,
    RansacReport,
    classify_inliers,
    refine_pose,
    run_hybrid_ransac,
)
from .solvers import SolverKind, SolverResult, solve
from .synth import (
    SceneConfig,
    SyntheticScene,
    run_noise_experiment,
    run_orthogonality_experiment,
    run_stability_experiment,
    sample_scene,
)
from .vps import VPFitConfig, VPModel, fit_vps_jointly, refine_vp, tardif_distance

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
