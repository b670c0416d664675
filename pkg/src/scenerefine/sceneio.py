"""Scene-file ingestion and result serialization.

Scene files are JSON: camera intrinsics, movable objects (mesh + optional
convex decomposition + initial pose + per-object prior sigmas), static
objects (mesh or box), gravity (vector or "from-plane" with an inline plane
record), cost weights, and optimizer settings.  All mesh paths are resolved
relative to the scene file.  Writes are atomic (write-temp-then-rename).
"""

from __future__ import annotations

import json
import os
import warnings as _warnings
from dataclasses import dataclass

import numpy as np

from .collision import ConvexPart, convex_hull, signed_distance, spheres_within_margin
from .costs import build_covariance, total_cost_and_grad
from .errors import InvalidQuaternion, IoError, MissingMesh, ParseError
from .meshio import load_mesh
from .optimizer import OptimizerConfig, RefinementReport
from .scene import (
    DEFAULT_CONTACT_TOLERANCE,
    CostWeights,
    CovarianceParams,
    MovableObject,
    Scene,
    StaticObject,
)
from .scenegeom import CorrespondencePair, PlaneModel, gravity_from_plane
from .se3 import Pose, quat_to_rotation, rotation_to_quat

__all__ = [
    "CameraIntrinsics",
    "SceneFile",
    "load_scene",
    "load_scene_file",
    "write_scene",
    "write_report",
    "load_report",
    "collision_report",
    "load_correspondences_csv",
    "write_json_atomic",
    "final_cost",
]

QUAT_NORM_WARN = 1e-6


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float


@dataclass
class SceneFile:
    """A parsed scene file: the Scene plus everything the CLI needs that the
    Scene itself does not carry."""

    scene: Scene
    camera: CameraIntrinsics | None
    optimizer: OptimizerConfig


def write_json_atomic(path: str, payload) -> None:
    tmp = path + ".tmp"
    try:
        with open(tmp, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
        os.replace(tmp, path)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _parse_pose(record, where: str) -> Pose:
    try:
        translation = np.asarray(record["translation"], dtype=float)
        quat = np.asarray(record["quaternion_wxyz"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{where}: pose needs 'translation' and 'quaternion_wxyz'") from exc
    if translation.shape != (3,) or quat.shape != (4,):
        raise ParseError(f"{where}: pose fields have wrong shape")
    norm = float(np.linalg.norm(quat))
    if not np.isfinite(norm) or norm < 0.5 or norm > 2.0:
        raise InvalidQuaternion(f"{where}: quaternion norm {norm:.6g} is not near 1")
    if abs(norm - 1.0) > QUAT_NORM_WARN:
        _warnings.warn(f"{where}: quaternion norm {norm:.6g} renormalized", stacklevel=3)
    return Pose(rotation=quat_to_rotation(quat / norm), translation=translation)


def _pose_record(pose: Pose) -> dict:
    return {
        "translation": [float(x) for x in pose.translation],
        "quaternion_wxyz": [float(x) for x in rotation_to_quat(pose.rotation)],
    }


def _box_part(size) -> ConvexPart:
    half = np.asarray(size, dtype=float) / 2.0
    if half.shape != (3,) or (half <= 0).any():
        raise ParseError(f"box size must be 3 positive numbers, got {size}")
    corners = np.array([[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)]) * half
    return ConvexPart(
        corners,
        np.zeros(3),
        float(np.linalg.norm(half)),
        np.vstack([np.eye(3), -np.eye(3)]),
        np.concatenate([half, half]),
    )


def _load_parts(record, base_dir: str, where: str) -> list[ConvexPart]:
    if "box" in record:
        return [_box_part(record["box"].get("size", record["box"]))]
    if "decomposition" in record:
        paths = record["decomposition"]
        if not isinstance(paths, list) or not paths:
            raise ParseError(f"{where}: 'decomposition' must be a non-empty list of paths")
    elif "mesh" in record:
        paths = [record["mesh"]]
    else:
        raise ParseError(f"{where}: needs 'mesh', 'decomposition', or 'box'")
    parts = []
    for rel in paths:
        path = os.path.join(base_dir, rel)
        if not os.path.exists(path):
            raise MissingMesh(f"{where}: mesh file not found: {path}")
        vertices, _faces = load_mesh(path)
        parts.append(convex_hull(vertices))
    return parts


def _parse_covariance(record, where: str) -> CovarianceParams:
    defaults = CovarianceParams()
    try:
        return CovarianceParams(
            sigma_xy=float(record.get("sigma_xy", defaults.sigma_xy)),
            sigma_z=float(record.get("sigma_z", defaults.sigma_z)),
            sigma_theta=float(record.get("sigma_theta", defaults.sigma_theta)),
        )
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{where}: bad covariance record ({exc})") from exc


def load_scene_file(path: str) -> SceneFile:
    """Parse a scene JSON file into a SceneFile (Scene + camera + optimizer)."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    base_dir = os.path.dirname(os.path.abspath(path))

    camera = None
    if "camera" in data:
        try:
            cam = data["camera"]
            camera = CameraIntrinsics(
                float(cam["fx"]), float(cam["fy"]), float(cam["cx"]), float(cam["cy"])
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}: camera needs fx, fy, cx, cy") from exc

    movables = []
    for k, rec in enumerate(data.get("movables", [])):
        where = f"{path}: movables[{k}]"
        name = rec.get("name", f"object-{k}")
        parts = _load_parts(rec, base_dir, where)
        pose = _parse_pose(rec.get("pose", {}), where)
        cov = _parse_covariance(rec.get("covariance", {}), where)
        prior = build_covariance(pose, cov)
        movables.append(MovableObject(name, parts, pose, prior, cov))

    statics = []
    for k, rec in enumerate(data.get("statics", [])):
        where = f"{path}: statics[{k}]"
        name = rec.get("name", f"static-{k}")
        parts = _load_parts(rec, base_dir, where)
        pose = _parse_pose(rec.get("pose", {}), where)
        statics.append(StaticObject(name, parts, pose))

    gravity = data.get("gravity", [0.0, 0.0, 1.0])
    if gravity == "from-plane":
        plane_rec = data.get("plane")
        if plane_rec is None:
            raise ParseError(f"{path}: gravity 'from-plane' requires a 'plane' record")
        try:
            plane = PlaneModel(
                np.asarray(plane_rec["normal"], dtype=float),
                float(plane_rec["offset"]),
                int(plane_rec.get("inlier_count", 0)),
                float(plane_rec.get("inlier_rms", 0.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}: plane record needs 'normal' and 'offset'") from exc
        gravity = gravity_from_plane(plane)
    else:
        gravity = np.asarray(gravity, dtype=float)
        if gravity.shape != (3,) or np.linalg.norm(gravity) < 1e-12:
            raise ParseError(f"{path}: gravity must be a nonzero 3-vector or 'from-plane'")

    wrec = data.get("weights", {})
    try:
        weights = CostWeights(
            collision=float(wrec.get("collision", CostWeights().collision)),
            gravity=float(wrec.get("gravity", CostWeights().gravity)),
        )
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path}: bad weights record ({exc})") from exc

    scene = Scene(
        movables,
        statics,
        gravity,
        weights,
        contact_tolerance=float(data.get("contact_tolerance", DEFAULT_CONTACT_TOLERANCE)),
    )

    orec = data.get("optimizer", {})
    try:
        optimizer = OptimizerConfig(**{k: v for k, v in orec.items()})
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path}: bad optimizer record ({exc})") from exc

    return SceneFile(scene=scene, camera=camera, optimizer=optimizer)


def load_scene(path: str) -> Scene:
    """Parse a scene JSON file and return the constructed Scene."""
    return load_scene_file(path).scene


def write_scene(
    path: str,
    records: dict,
) -> None:
    """Write a scene JSON file from pre-built records (used by the synthetic
    generator; library users normally edit scene files by hand)."""
    write_json_atomic(path, records)


def write_report(report: RefinementReport, scene: Scene, path: str) -> None:
    """Serialize a refinement report (final poses + diagnostics) as JSON."""
    objects = []
    for i, obj in enumerate(scene.movables):
        gap = report.support_gap[i]
        objects.append(
            {
                "name": obj.name,
                **_pose_record(report.final_poses[i]),
                "penetration_m": float(report.penetration[i]),
                "support_gap_m": None if not np.isfinite(gap) else float(gap),
            }
        )
    payload = {
        "cost_trace": [float(c) for c in report.cost_trace],
        "iterations": int(report.iterations),
        "termination": report.termination,
        "objects": objects,
        "warnings": list(report.warnings),
    }
    write_json_atomic(path, payload)


def load_report(path: str) -> dict:
    """Read a refinement report; reconstructs Pose objects under 'poses'."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc.msg}") from exc
    data["poses"] = [
        _parse_pose(rec, f"{path}: objects[{k}]") for k, rec in enumerate(data.get("objects", []))
    ]
    return data


def collision_report(scene: Scene, poses=None) -> list[dict]:
    """Every part pair with negative signed distance, deepest first.

    Rows carry the object names, part indices within each object, and the
    penetration depth in meters.  Ordering is deterministic: depth
    descending, then names/part indices.
    """
    poses = poses if poses is not None else scene.poses()
    bodies = [(m.name, m.parts, p) for m, p in zip(scene.movables, poses)]
    bodies += [(s.name, s.parts, s.pose) for s in scene.statics]
    n_mov = len(scene.movables)
    rows = []
    for a in range(len(bodies)):
        for b in range(a + 1, len(bodies)):
            if a >= n_mov and b >= n_mov:
                continue  # two statics never move
            name_a, parts_a, pose_a = bodies[a]
            name_b, parts_b, pose_b = bodies[b]
            for i, pa in enumerate(parts_a):
                for j, pb in enumerate(parts_b):
                    if not spheres_within_margin(pa, pose_a, pb, pose_b, 0.0):
                        continue
                    res = signed_distance(pa, pose_a, pb, pose_b)
                    if res.signed_distance < 0.0:
                        rows.append(
                            {
                                "object_a": name_a,
                                "part_a": i,
                                "object_b": name_b,
                                "part_b": j,
                                "depth_m": float(-res.signed_distance),
                            }
                        )
    rows.sort(
        key=lambda r: (-r["depth_m"], r["object_a"], r["part_a"], r["object_b"], r["part_b"])
    )
    return rows


def load_correspondences_csv(path: str) -> list[CorrespondencePair]:
    """Read correspondences from CSV with header object_id,cx,cy,cz,mx,my,mz."""
    import csv

    expected = ["object_id", "cx", "cy", "cz", "mx", "my", "mz"]
    pairs = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != expected:
            raise ParseError(f"{path}: expected header {','.join(expected)}")
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != 7:
                raise ParseError(f"{path}:{lineno}: expected 7 columns, got {len(row)}")
            try:
                vals = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: bad number ({exc})") from exc
            pairs.append(CorrespondencePair(row[0], np.array(vals[:3]), np.array(vals[3:])))
    return pairs


def final_cost(scene: Scene, poses) -> float:
    """Total cost of the scene at the given poses with the contact structure
    recomputed there (used by report round-trip checks)."""
    from .costs import GradientSettings, compute_structure

    deltas, targets = compute_structure(scene, poses)
    cost, _ = total_cost_and_grad(
        scene, poses, deltas, targets, GradientSettings(), with_grad=False
    )
    return cost
