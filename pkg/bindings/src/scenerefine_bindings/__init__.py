"""Thin bindings over the scenerefine refiner for host applications.

This layer exposes three entry points — :func:`load_scene`,
:func:`refine`, and :func:`estimate_plane` — that consume the refiner
exclusively through its public interfaces and return plain records
(dicts of JSON-compatible values).  A record returned by :func:`refine`
is field-for-field identical to the report the ``scenerefine refine``
command writes for the same scene and seed, and a record returned by
:func:`estimate_plane` matches the ``scenerefine scene-geom`` output.

The bindings contain no refinement, estimation, or serialization logic
of their own; every call delegates to the core package, so results and
error messages are exactly those of the core.

Concurrency: the core's compiled kernels do not release the GIL, so
concurrent refinement from multiple threads serializes on the
interpreter lock.  Use separate processes for parallel refinement.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from scenerefine import __version__ as _core_version
from scenerefine.errors import (
    BehindCamera,
    DegenerateInput,
    DegenerateRay,
    EmptyResult,
    InsufficientPairs,
    InvalidQuaternion,
    IoError,
    IterationLimit,
    MissingMesh,
    NoConsensus,
    NonFiniteCost,
    ParseError,
    PlacementFailure,
    ReleasedHandle,
    SceneRefineError,
)
from scenerefine.optimizer import OptimizerConfig, refine_scene
from scenerefine.scenegeom import (
    CorrespondencePair,
    PointCloud,
    estimate_scale_ransac,
    fit_plane_ransac,
    gravity_from_plane,
)
from scenerefine.sceneio import load_scene_file, write_report

__all__ = [
    "__version__",
    "BoundScene",
    "load_scene",
    "refine",
    "estimate_plane",
    "OptimizerConfig",
    "SceneRefineError",
    "ReleasedHandle",
    "BehindCamera",
    "DegenerateInput",
    "DegenerateRay",
    "EmptyResult",
    "InsufficientPairs",
    "InvalidQuaternion",
    "IoError",
    "IterationLimit",
    "MissingMesh",
    "NoConsensus",
    "NonFiniteCost",
    "ParseError",
    "PlacementFailure",
]

__version__ = _core_version


class BoundScene:
    """Opaque handle to a loaded scene.

    Holds the parsed scene, its camera intrinsics, and the optimizer
    settings embedded in the scene file.  :meth:`release` frees the
    underlying data; any use of the handle afterwards raises
    :class:`ReleasedHandle`.
    """

    def __init__(self, scene_file):
        self._sf = scene_file

    def _require(self):
        if self._sf is None:
            raise ReleasedHandle("operation on a released scene handle")
        return self._sf

    @property
    def scene(self):
        return self._require().scene

    @property
    def camera(self):
        return self._require().camera

    @property
    def optimizer(self) -> OptimizerConfig:
        return self._require().optimizer

    @property
    def object_names(self) -> list[str]:
        return [m.name for m in self._require().scene.movables]

    @property
    def released(self) -> bool:
        return self._sf is None

    def release(self) -> None:
        """Drop the underlying scene data.  Idempotent."""
        self._sf = None


def load_scene(path: str) -> BoundScene:
    """Parse a scene JSON file and return an opaque :class:`BoundScene`."""
    return BoundScene(load_scene_file(path))


def refine(scene, config: OptimizerConfig | None = None) -> dict:
    """Refine every movable pose in the scene and return the report record.

    ``scene`` is a :class:`BoundScene` or a path to a scene JSON file.
    ``config`` overrides the optimizer settings from the scene file.  The
    returned dict has exactly the fields the ``scenerefine refine``
    command writes (cost_trace, iterations, termination, objects,
    warnings); serializing it back to JSON reproduces the CLI report
    byte for byte.
    """
    if isinstance(scene, BoundScene):
        sf = scene._require()
    else:
        sf = load_scene_file(scene)
    cfg = config if config is not None else sf.optimizer
    report = refine_scene(sf.scene, cfg)
    # serialize through the core writer and read the record back, so the
    # binding cannot drift from the CLI's report format
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "report.json")
        write_report(report, sf.scene, path)
        with open(path) as fh:
            return json.load(fh)


def estimate_plane(
    points,
    confidence,
    corr_object_ids,
    corr_cloud_xyz,
    corr_metric_xyz,
    *,
    scale_iterations: int = 1000,
    plane_iterations: int = 2000,
    inlier_threshold: float = 0.005,
    seed: int = 0,
) -> dict:
    """Estimate metric scale and the support plane from raw arrays.

    ``points`` is (n, 3) reconstruction-space positions with (n,)
    ``confidence`` in [0, 1].  The three ``corr_*`` arguments are the
    correspondence table split into columns: (m,) object id strings,
    (m, 3) reconstruction-space coordinates, and (m, 3) metric
    coordinates.  Defaults match the ``scenerefine scene-geom`` command;
    the returned record has the same fields as its output file (normal,
    offset, inlier_count, inlier_rms, scale, gravity).
    """
    cloud = PointCloud(np.asarray(points, dtype=float), np.asarray(confidence, dtype=float))
    cloud_xyz = np.asarray(corr_cloud_xyz, dtype=float)
    metric_xyz = np.asarray(corr_metric_xyz, dtype=float)
    if not (len(corr_object_ids) == len(cloud_xyz) == len(metric_xyz)):
        raise DegenerateInput("estimate_plane: correspondence columns have unequal lengths")
    pairs = [
        CorrespondencePair(str(oid), c, m)
        for oid, c, m in zip(corr_object_ids, cloud_xyz, metric_xyz)
    ]
    scale = estimate_scale_ransac(pairs, iterations=scale_iterations, seed=seed)
    plane = fit_plane_ransac(
        cloud, iterations=plane_iterations, inlier_threshold=inlier_threshold, seed=seed
    )
    gravity = gravity_from_plane(plane)
    return {
        "normal": [float(x) for x in plane.normal],
        "offset": plane.offset,
        "inlier_count": plane.inlier_count,
        "inlier_rms": plane.inlier_rms,
        "scale": scale,
        "gravity": [float(x) for x in gravity],
    }
