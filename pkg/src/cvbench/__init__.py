"""Difficulty-binned benchmarking of two-view relative pose estimation.

The pipeline: align trajectories to ground truth, label per-pixel
co-visibility between image pairs, reduce each pair to three difficulty
criteria (co-visible fraction, relative scale, viewpoint angle), bin pairs
into a difficulty grid, evaluate pose estimates per pair and aggregate
success rates per box. A synthetic fixture suite with exact analytic
geometry doubles as test bed and usage example.
"""

from .alignment import AlignmentResult, Sim3, apply_and_filter, lo_ransac_align, umeyama_sim3
from .binning import (
    ANGLE_EDGES_DEG,
    DIFFICULTY_ORDER,
    OVERLAP_EDGES_PCT,
    SCALE_EDGES,
    BenchmarkManifest,
    DifficultyBox,
    ManifestBox,
    assign_box,
    build_manifest,
    valid_boxes,
)
from .covisibility import (
    CovisParams,
    WarpResult,
    classify,
    covisibility_pair,
    warp_depth,
)
from .criteria import (
    PairCriteria,
    compute_criteria,
    criteria_from_maps,
    lower_median,
    overlap,
    scale_ratio,
    viewpoint_angle,
)
from .depthops import align_depth_affine, normals_from_depth
from .errors import (
    AmbiguousDecomposition,
    BehindCamera,
    ConfigError,
    CvbError,
    DataError,
    DegenerateConfiguration,
    DegenerateFit,
    DegenerateGeometry,
    DomainError,
    EmptyCovisibility,
    InsufficientData,
    InsufficientMatches,
    NoModelFound,
    ScaleUnrecoverable,
)
from .geometry import (
    CameraIntrinsics,
    RelativePose,
    RigidPose,
    angle_between_deg,
    backproject,
    pixel_grid,
    project,
    quat_to_rotation,
    rays,
    relative_pose,
    rotation_angle_deg,
    rotation_to_quat,
)
from .poseeval import (
    ROTATION_SUCCESS_DEG,
    TRANSLATION_SUCCESS_M,
    EssentialResult,
    EvalRecord,
    MatchSet,
    decompose_essential,
    estimate_essential,
    evaluate_pair,
    judge,
    pose_errors,
    recover_scale,
    translation_direction_error_deg,
)
from .rasters import (
    CovisibilityMap,
    CovisLabel,
    DepthMap,
    NormalMap,
    read_covis,
    read_depth,
    read_normals,
    read_raster,
    write_covis,
    write_depth,
    write_normals,
    write_raster,
)
from .reporting import (
    aggregate,
    cumulative_svg,
    emit_report,
    marginal_svg,
    results_csv,
)
from .suite import make_fixture_suite
from .synth import Box, Plane, Scene, Sphere, oracle_covis, oracle_matches, render

__version__ = "0.1.0"

__all__ = [
    "ANGLE_EDGES_DEG",
    "AlignmentResult",
    "AmbiguousDecomposition",
    "BehindCamera",
    "BenchmarkManifest",
    "Box",
    "CameraIntrinsics",
    "ConfigError",
    "CovisLabel",
    "CovisParams",
    "CovisibilityMap",
    "CvbError",
    "DIFFICULTY_ORDER",
    "DataError",
    "DegenerateConfiguration",
    "DegenerateFit",
    "DegenerateGeometry",
    "DepthMap",
    "DifficultyBox",
    "DomainError",
    "EmptyCovisibility",
    "EssentialResult",
    "EvalRecord",
    "InsufficientData",
    "InsufficientMatches",
    "ManifestBox",
    "MatchSet",
    "NoModelFound",
    "NormalMap",
    "OVERLAP_EDGES_PCT",
    "PairCriteria",
    "Plane",
    "ROTATION_SUCCESS_DEG",
    "RelativePose",
    "RigidPose",
    "SCALE_EDGES",
    "ScaleUnrecoverable",
    "Scene",
    "Sim3",
    "Sphere",
    "TRANSLATION_SUCCESS_M",
    "WarpResult",
    "aggregate",
    "align_depth_affine",
    "angle_between_deg",
    "apply_and_filter",
    "assign_box",
    "backproject",
    "build_manifest",
    "classify",
    "compute_criteria",
    "covisibility_pair",
    "criteria_from_maps",
    "cumulative_svg",
    "decompose_essential",
    "emit_report",
    "estimate_essential",
    "evaluate_pair",
    "judge",
    "lo_ransac_align",
    "lower_median",
    "make_fixture_suite",
    "marginal_svg",
    "normals_from_depth",
    "oracle_covis",
    "oracle_matches",
    "overlap",
    "pixel_grid",
    "pose_errors",
    "project",
    "quat_to_rotation",
    "rays",
    "read_covis",
    "read_depth",
    "read_normals",
    "read_raster",
    "recover_scale",
    "relative_pose",
    "render",
    "results_csv",
    "rotation_angle_deg",
    "rotation_to_quat",
    "scale_ratio",
    "translation_direction_error_deg",
    "umeyama_sim3",
    "valid_boxes",
    "viewpoint_angle",
    "warp_depth",
    "write_covis",
    "write_depth",
    "write_normals",
    "write_raster",
]
