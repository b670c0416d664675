"""Scene-level physical-consistency refinement of 6D object poses.

Takes per-object pose estimates from any upstream estimator plus scene
geometry, and minimizes a three-term cost (pose fidelity, non-penetration,
gravity support) by preconditioned gradient descent on the pose manifold.
Also recovers metric scale and a support plane from point-cloud inputs.
"""

from .collision import (
    ConvexPart,
    DistanceResult,
    convex_hull,
    distance_gradient,
    epa_penetration,
    gjk_distance,
    signed_distance,
    smoothed_distance,
)
from .costs import (
    GradientSettings,
    build_covariance,
    collision_cost_and_grad,
    gravity_cost_and_grad,
    pose_cost_and_grad,
    support_indicator,
    total_cost_and_grad,
)
from .errors import SceneRefineError
from .metrics import EvalRecord, SymmetrySet, eval_mspd, eval_mssd
from .optimizer import OptimizerConfig, RefinementReport, refine_scene
from .scene import (
    CostWeights,
    CovarianceParams,
    MovableObject,
    PosePrior,
    Scene,
    StaticObject,
)
from .scenegeom import (
    CorrespondencePair,
    PlaneModel,
    PointCloud,
    estimate_scale_ransac,
    filter_cloud,
    fit_plane_ransac,
    gravity_from_plane,
    plane_to_static_object,
)
from .sceneio import CameraIntrinsics, collision_report, load_scene, write_report
from .se3 import Pose, exp_so3, log_so3, pose_compose, pose_inverse, retract
from .synth import NoiseModel, generate_synthetic_scene

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "Pose",
    "exp_so3",
    "log_so3",
    "pose_compose",
    "pose_inverse",
    "retract",
    "ConvexPart",
    "DistanceResult",
    "convex_hull",
    "gjk_distance",
    "epa_penetration",
    "signed_distance",
    "distance_gradient",
    "smoothed_distance",
    "GradientSettings",
    "build_covariance",
    "pose_cost_and_grad",
    "collision_cost_and_grad",
    "gravity_cost_and_grad",
    "support_indicator",
    "total_cost_and_grad",
    "CovarianceParams",
    "PosePrior",
    "CostWeights",
    "MovableObject",
    "StaticObject",
    "Scene",
    "OptimizerConfig",
    "RefinementReport",
    "refine_scene",
    "PointCloud",
    "CorrespondencePair",
    "PlaneModel",
    "estimate_scale_ransac",
    "filter_cloud",
    "fit_plane_ransac",
    "gravity_from_plane",
    "plane_to_static_object",
    "CameraIntrinsics",
    "load_scene",
    "write_report",
    "collision_report",
    "SymmetrySet",
    "EvalRecord",
    "eval_mssd",
    "eval_mspd",
    "NoiseModel",
    "generate_synthetic_scene",
    "SceneRefineError",
]
