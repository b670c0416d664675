"""Synthetic desk scenes for evaluation: objects resting on a table seen by
an oblique camera, with priors perturbed by a ray-biased noise model.

The camera looks down at the table at ~45 degrees, so the dominant
along-ray depth noise is neither vertical nor horizontal in the world: an
optimizer that only drops objects to the table cannot fix the lateral
component, which is what the pose-fidelity term is for.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .collision import convex_hull, signed_distance
from .errors import PlacementFailure
from .meshio import write_obj
from .scene import CovarianceParams, MovableObject, Scene, StaticObject
from .sceneio import _pose_record, write_json_atomic
from .costs import build_covariance
from .se3 import Pose, exp_so3, pose_compose, pose_inverse

__all__ = ["NoiseModel", "generate_synthetic_scene", "write_synthetic_scene"]

TABLE_SIZE = (1.0, 1.0, 0.05)
TABLE_PLACEMENT_EXTENT = 0.5  # lateral square within which objects land
PLACEMENT_GAP = 5e-3
MAX_PLACEMENT_TRIES = 1000
CAMERA_PITCH = np.deg2rad(45.0)
CAMERA_DISTANCE = 1.2
# Depth along the viewing ray is far less certain than the lateral position,
# so the prior is deliberately loose along the ray relative to the injected
# noise: the physical terms own the depth correction.
PRIOR_SIGMA_Z_FACTOR = 10.0


@dataclass(frozen=True)
class NoiseModel:
    """Ray-biased prior noise: lateral / along-ray translation sigmas
    (meters), rotation sigma (radians), and the fraction of objects whose
    prior is pushed along the ray until it penetrates the table."""

    sigma_xy: float = 0.01
    sigma_z: float = 0.05
    sigma_theta: float = 0.1
    penetration_fraction: float = 0.3

    def __post_init__(self):
        if min(self.sigma_xy, self.sigma_z, self.sigma_theta) < 0.0:
            raise ValueError("noise sigmas must be >= 0")
        if not 0.0 <= self.penetration_fraction <= 1.0:
            raise ValueError("penetration_fraction must be in [0, 1]")


def _camera_pose() -> Pose:
    """World-from-camera transform: camera above and behind the table center,
    pitched down by CAMERA_PITCH, optical axis through the table center."""
    c = CAMERA_DISTANCE * np.array(
        [0.0, -np.cos(CAMERA_PITCH), np.sin(CAMERA_PITCH)]
    )
    z_axis = -c / np.linalg.norm(c)  # camera looks at the world origin
    x_axis = np.array([1.0, 0.0, 0.0])
    y_axis = np.cross(z_axis, x_axis)
    return Pose(np.column_stack([x_axis, y_axis, z_axis]), c)


def _ray_frame(t: np.ndarray) -> np.ndarray:
    """Orthonormal frame whose third column is the camera ray through t."""
    z = t / np.linalg.norm(t)
    ref = np.array([1.0, 0.0, 0.0]) if abs(z[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    x = np.cross(z, ref)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return np.column_stack([x, y, z])


def _make_shape(rng: np.random.Generator):
    """Random box or hexagonal-prism hull; origin at the centroid, resting
    height = half the shape height."""
    if rng.random() < 0.5:
        half = rng.uniform(0.02, 0.04, 3)
        verts = np.array([[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)]) * half
        height = 2.0 * half[2]
    else:
        radius = rng.uniform(0.02, 0.04)
        height = rng.uniform(0.04, 0.08)
        ang = np.arange(6) * np.pi / 3.0
        ring = np.column_stack([radius * np.cos(ang), radius * np.sin(ang)])
        verts = np.vstack(
            [np.column_stack([ring, np.full(6, s * height / 2.0)]) for s in (-1, 1)]
        )
    return verts, height


def generate_synthetic_scene(
    seed: int,
    object_count: int = 4,
    noise: NoiseModel | None = None,
) -> tuple[Scene, list[Pose]]:
    """Build a scene of objects resting on a table with noisy pose priors.

    Returns (scene, ground_truth_poses); the scene's object poses (and the
    priors built from them) are the perturbed estimates, ground truth is
    returned separately.  Deterministic in the seed.  Raises
    PlacementFailure when rejection sampling cannot fit all objects.
    """
    noise = noise or NoiseModel()
    rng = np.random.default_rng(seed)
    cam = _camera_pose()
    world_from = lambda pose_w: pose_compose(pose_inverse(cam), pose_w)

    table_w = Pose(np.eye(3), np.array([0.0, 0.0, -TABLE_SIZE[2] / 2.0]))
    table_verts = (
        np.array([[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)])
        * np.asarray(TABLE_SIZE)
        / 2.0
    )
    table = StaticObject("table", [convex_hull(table_verts)], world_from(table_w))

    placed: list[tuple[np.ndarray, float]] = []  # (xy, bounding radius)
    movables = []
    gt_poses = []
    forced = rng.random(object_count) < noise.penetration_fraction
    for k in range(object_count):
        verts, height = _make_shape(rng)
        radius = float(np.linalg.norm(verts[:, :2], axis=1).max())
        for attempt in range(MAX_PLACEMENT_TRIES):
            xy = rng.uniform(-TABLE_PLACEMENT_EXTENT / 2.0, TABLE_PLACEMENT_EXTENT / 2.0, 2)
            if all(
                np.linalg.norm(xy - oxy) >= radius + orad + PLACEMENT_GAP
                for oxy, orad in placed
            ):
                break
        else:
            raise PlacementFailure(
                f"could not place object {k} after {MAX_PLACEMENT_TRIES} samples"
            )
        placed.append((xy, radius))
        yaw = rng.uniform(0.0, 2.0 * np.pi)
        pose_w = Pose(exp_so3(np.array([0.0, 0.0, yaw])), np.array([*xy, height / 2.0]))
        gt = world_from(pose_w)
        gt_poses.append(gt)

        frame = _ray_frame(gt.translation)
        dt_local = rng.normal(0.0, 1.0, 3) * np.array(
            [noise.sigma_xy, noise.sigma_xy, noise.sigma_z]
        )
        phi = rng.normal(0.0, noise.sigma_theta, 3)
        if forced[k]:
            # push along the ray (away from the camera) deep enough to
            # guarantee table penetration from the resting pose
            dt_local[2] = height / 2.0 + rng.uniform(0.005, 0.02)
        prior_pose = Pose(
            gt.rotation @ exp_so3(phi) if noise.sigma_theta > 0 or forced[k] else gt.rotation,
            gt.translation + frame @ dt_local,
        )
        if noise.sigma_xy == 0.0 and noise.sigma_z == 0.0 and noise.sigma_theta == 0.0 and not forced[k]:
            prior_pose = gt
        cov = CovarianceParams(
            sigma_xy=max(noise.sigma_xy, 1e-3),
            sigma_z=max(PRIOR_SIGMA_Z_FACTOR * noise.sigma_z, 1e-2),
            sigma_theta=max(noise.sigma_theta, 1e-2),
        )
        part = convex_hull(verts)
        movables.append(
            MovableObject(f"object-{k}", [part], prior_pose, build_covariance(prior_pose, cov), cov)
        )

    gravity_cam = cam.rotation.T @ np.array([0.0, 0.0, -1.0])
    scene = Scene(movables, [table], gravity_cam)

    # ground-truth sanity: nothing overlaps at the true poses
    for i in range(object_count):
        for j in range(i + 1, object_count):
            d = signed_distance(
                movables[i].parts[0], gt_poses[i], movables[j].parts[0], gt_poses[j]
            ).signed_distance
            if d < -1e-9:
                raise PlacementFailure(f"ground-truth overlap between objects {i} and {j}")
    return scene, gt_poses


def write_synthetic_scene(
    out_scene: str,
    out_gt: str,
    seed: int,
    object_count: int = 4,
    noise: NoiseModel | None = None,
) -> None:
    """Generate a scene and write it as a scene file + ground-truth file.

    Meshes go to a `meshes/` directory next to the scene file; the ground
    truth file holds one pose record per object, in scene order.
    """
    scene, gt_poses = generate_synthetic_scene(seed, object_count, noise)
    base_dir = os.path.dirname(os.path.abspath(out_scene))
    mesh_dir = os.path.join(base_dir, "meshes")
    os.makedirs(mesh_dir, exist_ok=True)

    def dump_mesh(name: str, part) -> str:
        from scipy.spatial import ConvexHull

        hull = ConvexHull(part.vertices)
        rel = os.path.join("meshes", f"{name}.obj")
        write_obj(os.path.join(base_dir, rel), hull.points, hull.simplices)
        return rel

    movable_recs = []
    for obj in scene.movables:
        movable_recs.append(
            {
                "name": obj.name,
                "mesh": dump_mesh(obj.name, obj.parts[0]),
                "pose": _pose_record(obj.pose),
                "covariance": {
                    "sigma_xy": obj.cov.sigma_xy,
                    "sigma_z": obj.cov.sigma_z,
                    "sigma_theta": obj.cov.sigma_theta,
                },
            }
        )
    static_recs = []
    for st in scene.statics:
        static_recs.append(
            {
                "name": st.name,
                "mesh": dump_mesh(st.name, st.parts[0]),
                "pose": _pose_record(st.pose),
            }
        )
    write_json_atomic(
        out_scene,
        {
            "camera": {"fx": 600.0, "fy": 600.0, "cx": 320.0, "cy": 240.0},
            "movables": movable_recs,
            "statics": static_recs,
            "gravity": [float(g) for g in scene.gravity_dir],
            "weights": {
                "collision": scene.weights.collision,
                "gravity": scene.weights.gravity,
            },
            "contact_tolerance": scene.contact_tolerance,
        },
    )
    write_json_atomic(
        out_gt,
        {
            "objects": [
                {"name": obj.name, **_pose_record(p)}
                for obj, p in zip(scene.movables, gt_poses)
            ]
        },
    )
