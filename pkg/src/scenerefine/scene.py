"""Scene data model: objects made of convex parts, cost weights, and the
parameters of the pose prior."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .collision import ConvexPart
from .se3 import Pose

__all__ = [
    "CovarianceParams",
    "PosePrior",
    "CostWeights",
    "MovableObject",
    "StaticObject",
    "Scene",
]

DEFAULT_CONTACT_TOLERANCE = 1e-3  # m
DEFAULT_ACTIVATION_MARGIN = 0.05  # m; broad-phase culling margin


@dataclass(frozen=True)
class CovarianceParams:
    """Standard deviations of the pose prior: lateral / along-ray / angular."""

    sigma_xy: float = 0.01  # m
    sigma_z: float = 0.05  # m
    sigma_theta: float = 0.1  # rad

    def __post_init__(self):
        if min(self.sigma_xy, self.sigma_z, self.sigma_theta) <= 0.0:
            raise ValueError("covariance sigmas must be strictly positive")


@dataclass(frozen=True)
class PosePrior:
    """Initial pose estimate with its 6x6 precision matrix (block-diagonal:
    translational block in m^-2, rotational block in rad^-2)."""

    estimate: Pose
    precision: np.ndarray  # (6, 6)


@dataclass(frozen=True)
class CostWeights:
    collision: float = 10.0
    gravity: float = 1.0

    def __post_init__(self):
        if self.collision < 0.0 or self.gravity < 0.0:
            raise ValueError("cost weights must be non-negative")


@dataclass
class MovableObject:
    """Movable object: convex parts in the object frame, current pose, and a
    pose prior built from the initial estimate."""

    name: str
    parts: list[ConvexPart]
    pose: Pose
    prior: PosePrior
    cov: CovarianceParams = field(default_factory=CovarianceParams)


@dataclass
class StaticObject:
    name: str
    parts: list[ConvexPart]
    pose: Pose


@dataclass
class Scene:
    """All objects plus gravity direction and cost weights.

    Poses are expressed in the camera frame; ``gravity_dir`` is a unit
    vector in the same frame.
    """

    movables: list[MovableObject]
    statics: list[StaticObject]
    gravity_dir: np.ndarray
    weights: CostWeights = field(default_factory=CostWeights)
    contact_tolerance: float = DEFAULT_CONTACT_TOLERANCE
    activation_margin: float = DEFAULT_ACTIVATION_MARGIN

    def __post_init__(self):
        self.gravity_dir = np.asarray(self.gravity_dir, dtype=float)
        n = np.linalg.norm(self.gravity_dir)
        if n > 0.0:
            self.gravity_dir = self.gravity_dir / n

    def poses(self) -> list[Pose]:
        return [m.pose for m in self.movables]

    def with_poses(self, poses: list[Pose]) -> "Scene":
        movables = [replace(m, pose=p) for m, p in zip(self.movables, poses)]
        return Scene(
            movables,
            self.statics,
            self.gravity_dir,
            self.weights,
            self.contact_tolerance,
            self.activation_margin,
        )
