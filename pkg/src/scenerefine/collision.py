"""Convex geometry kernel: signed distance between convex parts and its
pose-gradients.

Separation distances come from GJK with witness-point recovery; penetration
depth comes from EPA.  The compiled inner loops live in :mod:`_kernels`.

Sign/direction convention (used by every gradient in the package):
``axis`` points from witness_a toward witness_b when the parts are
separated, and along the minimum-translation direction for part B during
penetration.  Translating B by ``|signed_distance| * axis`` makes a
penetrating pair exactly touching, and the two conventions agree in the
touching limit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from . import _kernels
from .errors import DegenerateInput, IterationLimit
from .se3 import Pose, retract

__all__ = [
    "ConvexPart",
    "DistanceResult",
    "convex_hull",
    "gjk_distance",
    "epa_penetration",
    "signed_distance",
    "distance_gradient",
    "smoothed_distance",
    "spheres_within_margin",
]


@dataclass(frozen=True)
class ConvexPart:
    """Convex polytope given by its hull vertices in a part-local frame.

    ``normals``/``offsets`` cache the face half-spaces (n . x <= off) for
    ray queries; ``centroid`` is the vertex mean and ``radius`` the bounding
    sphere radius about it.
    """

    vertices: np.ndarray  # (n, 3)
    centroid: np.ndarray  # (3,)
    radius: float
    normals: np.ndarray  # (f, 3)
    offsets: np.ndarray  # (f,)


def convex_hull(points: np.ndarray) -> ConvexPart:
    """Minimal-vertex convex hull of a 3D point set.

    Raises DegenerateInput for fewer than 4 points or coplanar/collinear
    sets.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 3 or points.shape[0] < 4:
        raise DegenerateInput("convex_hull: need at least 4 points in 3D")
    try:
        hull = ConvexHull(points)
    except QhullError as exc:
        raise DegenerateInput(f"convex_hull: degenerate input ({exc})") from exc
    verts = np.ascontiguousarray(points[hull.vertices])
    centroid = verts.mean(axis=0)
    radius = float(np.linalg.norm(verts - centroid, axis=1).max())
    # Qhull equations: n . x + c <= 0 inside  ->  n . x <= -c
    normals = hull.equations[:, :3].copy()
    offsets = -hull.equations[:, 3].copy()
    return ConvexPart(verts, centroid, radius, normals, offsets)


@dataclass(frozen=True)
class DistanceResult:
    """Signed distance (negative = penetration) with world-frame witness
    points and the separating/penetration axis (unit vector)."""

    signed_distance: float
    witness_a: np.ndarray
    witness_b: np.ndarray
    axis: np.ndarray


def spheres_within_margin(
    a: ConvexPart, pose_a: Pose, b: ConvexPart, pose_b: Pose, margin: float
) -> bool:
    """Broad-phase test: can the pair be closer than ``margin``?

    Never culls a pair whose true distance is below the margin (bounding
    spheres give a lower bound on the separation).
    """
    ca = pose_a.rotation @ a.centroid + pose_a.translation
    cb = pose_b.rotation @ b.centroid + pose_b.translation
    return float(np.linalg.norm(cb - ca)) - a.radius - b.radius <= margin


def _world_vertices(part: ConvexPart, pose: Pose) -> np.ndarray:
    return part.vertices @ pose.rotation.T + pose.translation


def gjk_distance(a: ConvexPart, pose_a: Pose, b: ConvexPart, pose_b: Pose) -> DistanceResult:
    """Distance between two separated convex parts with witness points.

    For touching/overlapping parts the result reports signed_distance 0 and
    callers should use :func:`signed_distance` (which dispatches to EPA).
    """
    wa = _world_vertices(a, pose_a)
    wb = _world_vertices(b, pose_b)
    status, dist, pa, pb, axis, sa, sb, m = _kernels.gjk_core(wa, wb)
    if status == 2:
        raise IterationLimit("gjk_distance: simplex refinement exceeded 128 iterations")
    if status == 1:
        mid = 0.5 * (wa.mean(axis=0) + wb.mean(axis=0))
        return DistanceResult(0.0, mid, mid, np.array([1.0, 0.0, 0.0]))
    return DistanceResult(float(dist), pa, pb, axis)


def epa_penetration(a: ConvexPart, pose_a: Pose, b: ConvexPart, pose_b: Pose) -> DistanceResult:
    """Penetration depth via the expanding polytope algorithm.

    Requires the parts to touch/overlap.  Returns signed_distance = -depth;
    translating B by depth * axis makes the parts exactly touching.
    """
    wa = _world_vertices(a, pose_a)
    wb = _world_vertices(b, pose_b)
    status, dist, pa, pb, axis, sa, sb, m = _kernels.gjk_core(wa, wb)
    if status == 0:
        raise DegenerateInput("epa_penetration: parts do not overlap")
    if status == 2:
        raise IterationLimit("epa_penetration: GJK did not converge")
    return _epa_from_simplex(wa, wb, sa, sb, m)


def _epa_from_simplex(wa, wb, sa, sb, m) -> DistanceResult:
    status, depth, pa, pb, axis = _kernels.epa_core(wa, wb, sa, sb, m)
    if status == 2:
        raise IterationLimit("epa_penetration: face expansion limit exceeded")
    if status != 0:
        raise DegenerateInput("epa_penetration: degenerate polytope")
    return DistanceResult(-float(depth), pa, pb, axis)


def signed_distance(a: ConvexPart, pose_a: Pose, b: ConvexPart, pose_b: Pose) -> DistanceResult:
    """Signed distance between two convex parts: GJK for separation, EPA for
    penetration.  Negative iff the interiors overlap."""
    wa = _world_vertices(a, pose_a)
    wb = _world_vertices(b, pose_b)
    status, dist, pa, pb, axis, sa, sb, m = _kernels.gjk_core(wa, wb)
    if status == 0:
        return DistanceResult(float(dist), pa, pb, axis)
    if status == 2:
        raise IterationLimit("signed_distance: GJK exceeded 128 iterations")
    return _epa_from_simplex(wa, wb, sa, sb, m)


def _deterministic_grads(res: DistanceResult, pose_a: Pose, pose_b: Pose):
    """Right-tangent gradients of the signed distance from witness points.

    First-order model: witness points are attached to their bodies.  For
    either sign of d, d increases when B moves along +axis and decreases
    when A does.
    """
    axis = res.axis
    na = pose_a.rotation.T @ axis
    nb = pose_b.rotation.T @ axis
    pa_local = pose_a.rotation.T @ (res.witness_a - pose_a.translation)
    pb_local = pose_b.rotation.T @ (res.witness_b - pose_b.translation)
    grad_a = np.concatenate([-na, -np.cross(pa_local, na)])
    grad_b = np.concatenate([nb, np.cross(pb_local, nb)])
    return grad_a, grad_b


def distance_gradient(
    a: ConvexPart,
    pose_a: Pose,
    b: ConvexPart,
    pose_b: Pose,
    noise_scale: float = 0.0,
    sample_count: int = 1,
    seed: int = 0,
):
    """Gradient of the signed distance w.r.t. both poses (right tangent).

    With ``noise_scale == 0`` and ``sample_count == 1`` this is the
    deterministic witness-point gradient.  Otherwise it is a randomized-
    smoothing estimate: the deterministic gradient averaged over zero-mean
    Gaussian tangent perturbations of both poses, reproducible for a fixed
    seed.

    Returns ``(grad_a, grad_b)`` as 6-vectors ``(rho, phi)``.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    if noise_scale == 0.0:
        res = signed_distance(a, pose_a, b, pose_b)
        return _deterministic_grads(res, pose_a, pose_b)
    rng = np.random.default_rng(seed)
    acc_a = np.zeros(6)
    acc_b = np.zeros(6)
    for _ in range(sample_count):
        eps_a = rng.normal(0.0, noise_scale, 6)
        eps_b = rng.normal(0.0, noise_scale, 6)
        res = signed_distance(a, retract(pose_a, eps_a), b, retract(pose_b, eps_b))
        ga, gb = _deterministic_grads(res, pose_a, pose_b)
        acc_a += ga
        acc_b += gb
    return acc_a / sample_count, acc_b / sample_count


def smoothed_distance(
    a: ConvexPart,
    pose_a: Pose,
    b: ConvexPart,
    pose_b: Pose,
    noise_scale: float,
    sample_count: int,
    seed: int,
) -> float:
    """Monte-Carlo smoothed signed distance with the same perturbation draws
    as :func:`distance_gradient` (common random numbers for FD checks)."""
    rng = np.random.default_rng(seed)
    acc = 0.0
    for _ in range(sample_count):
        eps_a = rng.normal(0.0, noise_scale, 6)
        eps_b = rng.normal(0.0, noise_scale, 6)
        acc += signed_distance(
            a, retract(pose_a, eps_a), b, retract(pose_b, eps_b)
        ).signed_distance
    return acc / sample_count
