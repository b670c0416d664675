"""Shared helpers: canonical convex shapes and small scenes."""

import numpy as np
import pytest

from scenerefine.collision import ConvexPart, convex_hull
from scenerefine.costs import build_covariance
from scenerefine.scene import CovarianceParams, MovableObject, Scene, StaticObject
from scenerefine.se3 import Pose, exp_so3


def box_part(size) -> ConvexPart:
    """Axis-aligned box of the given full extents, centered at the origin."""
    half = np.asarray(size, dtype=float) / 2.0
    corners = np.array([[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)]) * half
    return convex_hull(corners)


def icosphere_part(radius: float = 0.05, subdivisions: int = 2) -> ConvexPart:
    """Icosphere hull (162 vertices at 2 subdivisions)."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=float,
    )
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [v / np.linalg.norm(v) for v in verts]
    cache = {}

    def midpoint(i, j):
        key = (min(i, j), max(i, j))
        if key not in cache:
            m = verts[i] + verts[j]
            verts.append(m / np.linalg.norm(m))
            cache[key] = len(verts) - 1
        return cache[key]

    for _ in range(subdivisions):
        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return convex_hull(radius * np.asarray(verts))


def pose_xyz(x=0.0, y=0.0, z=0.0, axis_angle=None) -> Pose:
    rot = np.eye(3) if axis_angle is None else exp_so3(np.asarray(axis_angle, dtype=float))
    return Pose(rot, np.array([x, y, z], dtype=float))


def single_box_scene(
    dz: float,
    sigma_z: float = 0.5,
    contact_tolerance: float = 5e-4,
    box_size: float = 0.05,
):
    """One box above/below its resting height on a table, seen from straight
    above (camera on the table normal).

    dz < 0 levitates the box |dz| above the table, dz > 0 pushes it in.
    Returns (scene, prior_pose, resting_center_z).
    """
    table = StaticObject(
        "table", [box_part((1.0, 1.0, 0.1))], Pose(np.eye(3), np.array([0.0, 0.0, 1.05]))
    )
    resting_z = 1.0 - box_size / 2.0
    cov = CovarianceParams(sigma_xy=0.01, sigma_z=sigma_z, sigma_theta=0.1)
    prior_pose = Pose(np.eye(3), np.array([0.02, 0.03, resting_z + dz]))
    obj = MovableObject(
        "box",
        [box_part((box_size,) * 3)],
        prior_pose,
        build_covariance(prior_pose, cov),
        cov,
    )
    scene = Scene([obj], [table], gravity_dir=[0, 0, 1], contact_tolerance=contact_tolerance)
    return scene, prior_pose, resting_z


@pytest.fixture
def rng():
    return np.random.default_rng(0)
