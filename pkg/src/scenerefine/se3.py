"""Rotation and rigid-transform algebra.

Conventions used throughout the package:

* Rotations are stored as 3x3 orthonormal matrices (row-major numpy arrays);
  unit quaternions appear only in file I/O.
* Tangent vectors are 6-vectors ``(rho, phi)``: translational part first
  (meters), rotational part last (radians, axis-angle).
* Perturbations are applied on the RIGHT: ``T <- T * exp(eps)``, i.e. the
  retraction is ``(R @ exp_so3(phi), t + R @ rho)``.  Every Jacobian and
  gradient in this package follows this convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInput

__all__ = [
    "Pose",
    "hat",
    "exp_so3",
    "log_so3",
    "log_jacobian_inv",
    "rotation_to_quat",
    "quat_to_rotation",
    "orthonormalize",
    "pose_compose",
    "pose_inverse",
    "act",
    "retract",
]

_SMALL_ANGLE = 1e-6


def hat(v: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix such that hat(v) @ w = cross(v, w)."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def exp_so3(omega: np.ndarray) -> np.ndarray:
    """Rodrigues rotation about axis omega/|omega| by angle |omega|."""
    omega = np.asarray(omega, dtype=float)
    theta = np.linalg.norm(omega)
    k = hat(omega)
    if theta < _SMALL_ANGLE:
        # Taylor: sin(t)/t ~ 1 - t^2/6, (1-cos t)/t^2 ~ 1/2 - t^2/24
        a = 1.0 - theta**2 / 6.0
        b = 0.5 - theta**2 / 24.0
    else:
        a = np.sin(theta) / theta
        b = (1.0 - np.cos(theta)) / theta**2
    return np.eye(3) + a * k + b * (k @ k)


def _quat_from_matrix(r: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) with w >= 0, via Shepperd's method."""
    t = np.trace(r)
    if t > 0.0:
        s = np.sqrt(t + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s]
        )
    else:
        i = int(np.argmax(np.diag(r)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(r[i, i] - r[j, j] - r[k, k] + 1.0) * 2.0
        q = np.empty(4)
        q[0] = (r[k, j] - r[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (r[j, i] + r[i, j]) / s
        q[1 + k] = (r[k, i] + r[i, k]) / s
    if q[0] < 0.0:
        q = -q
    return q / np.linalg.norm(q)


def rotation_to_quat(r: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) of a rotation matrix, w >= 0."""
    return _quat_from_matrix(np.asarray(r, dtype=float))


def quat_to_rotation(q: np.ndarray) -> np.ndarray:
    """Rotation matrix of a unit quaternion (w, x, y, z)."""
    w, x, y, z = np.asarray(q, dtype=float)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def log_so3(r: np.ndarray, *, atol: float = 1e-6) -> np.ndarray:
    """Axis-angle vector of a rotation matrix, with angle in [0, pi].

    The branch near angle pi is resolved through the quaternion with
    positive scalar part; an exact pi tie picks the axis whose first
    nonzero component is positive (deterministic for tests).
    """
    r = np.asarray(r, dtype=float)
    if r.shape != (3, 3) or np.abs(r @ r.T - np.eye(3)).max() > atol or np.linalg.det(r) < 0.0:
        raise DegenerateInput("log_so3: input is not a rotation matrix")
    q = _quat_from_matrix(r)
    w, vec = q[0], q[1:]
    n = np.linalg.norm(vec)
    if n < 1e-12:
        return 2.0 * vec  # identity (first-order)
    angle = 2.0 * np.arctan2(n, w)
    axis = vec / n
    if w < 1e-12:
        # angle == pi: q and -q coincide; fix the axis sign deterministically
        for c in axis:
            if abs(c) > 1e-12:
                if c < 0.0:
                    axis = -axis
                break
    return angle * axis


def log_jacobian_inv(theta: np.ndarray) -> np.ndarray:
    """Inverse right-Jacobian of the SO(3) log map.

    Returns M with d/deps log(R @ exp_so3(eps)) = M at eps = 0, where
    theta = log_so3(R).  Requires |theta| < pi.
    """
    theta = np.asarray(theta, dtype=float)
    t = np.linalg.norm(theta)
    k = hat(theta)
    if t < _SMALL_ANGLE:
        return np.eye(3) + 0.5 * k + (1.0 / 12.0) * (k @ k)
    c = 1.0 / t**2 - (1.0 + np.cos(t)) / (2.0 * t * np.sin(t))
    return np.eye(3) + 0.5 * k + c * (k @ k)


def orthonormalize(r: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix (Frobenius) via SVD; keeps det = +1."""
    u, _, vt = np.linalg.svd(r)
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


@dataclass(frozen=True)
class Pose:
    """Rigid transform: p_world = rotation @ p_local + translation."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float))

    @staticmethod
    def identity() -> "Pose":
        return Pose()


def pose_compose(a: Pose, b: Pose) -> Pose:
    r = orthonormalize(a.rotation @ b.rotation)
    return Pose(r, a.rotation @ b.translation + a.translation)


def pose_inverse(a: Pose) -> Pose:
    rt = a.rotation.T
    return Pose(rt.copy(), -(rt @ a.translation))


def act(a: Pose, p: np.ndarray) -> np.ndarray:
    """Apply the transform to one point or an (n, 3) array of points."""
    p = np.asarray(p, dtype=float)
    return p @ a.rotation.T + a.translation


def retract(pose: Pose, eps: np.ndarray) -> Pose:
    """Right-tangent retraction T * exp(eps), eps = (rho, phi)."""
    rho, phi = np.asarray(eps[:3], dtype=float), np.asarray(eps[3:], dtype=float)
    r = orthonormalize(pose.rotation @ exp_so3(phi))
    return Pose(r, pose.translation + pose.rotation @ rho)
