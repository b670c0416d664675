"""Metric onboarding from two-view reconstructions: RANSAC scale recovery
from correspondence distance ratios, point-cloud filtering, RANSAC table-plane
fitting, and gravity derivation from the fitted plane.

All estimators are deterministic for a fixed master seed: every hypothesis
draws from its own generator seeded by (master seed, iteration index), and
consensus ties break toward the lowest iteration index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .collision import convex_hull
from .errors import DegenerateInput, EmptyResult, InsufficientPairs, NoConsensus
from .scene import StaticObject
from .se3 import Pose

__all__ = [
    "PointCloud",
    "CorrespondencePair",
    "PlaneModel",
    "LABEL_BACKGROUND",
    "LABEL_OBJECT",
    "LABEL_UNKNOWN",
    "estimate_scale_ransac",
    "filter_cloud",
    "fit_plane_ransac",
    "gravity_from_plane",
    "plane_to_static_object",
]

LABEL_BACKGROUND = 0
LABEL_OBJECT = 1
LABEL_UNKNOWN = 2

MIN_PLANE_POINTS = 50
MIN_INLIER_FRACTION = 0.10
MIN_PAIR_SEPARATION = 1e-6
MAX_RATIO_POOL = 20000


@dataclass(frozen=True)
class PointCloud:
    """Reconstructed point cloud with per-point confidence and optional
    object-pixel labels / bounding-box membership flags."""

    points: np.ndarray  # (n, 3)
    confidence: np.ndarray  # (n,) in [0, 1]
    label: np.ndarray | None = None  # (n,) int, LABEL_* codes
    in_bbox: np.ndarray | None = None  # (n,) bool

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        conf = np.asarray(self.confidence, dtype=float)
        if points.ndim != 2 or points.shape[1] != 3:
            raise DegenerateInput("PointCloud: points must be (n, 3)")
        if conf.shape != (points.shape[0],):
            raise DegenerateInput("PointCloud: confidence length mismatch")
        if conf.size and (conf.min() < 0.0 or conf.max() > 1.0):
            raise DegenerateInput("PointCloud: confidences must lie in [0, 1]")
        for name in ("label", "in_bbox"):
            arr = getattr(self, name)
            if arr is not None and np.asarray(arr).shape != (points.shape[0],):
                raise DegenerateInput(f"PointCloud: {name} length mismatch")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "confidence", conf)

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class CorrespondencePair:
    """One 2D match lifted to 3D: the reconstruction-space point (arbitrary
    scale) and the metric point from the rendered template depth."""

    object_id: str
    point_cloud_xyz: np.ndarray  # (3,) up-to-scale units
    metric_xyz: np.ndarray  # (3,) meters

    def __post_init__(self):
        c = np.asarray(self.point_cloud_xyz, dtype=float)
        m = np.asarray(self.metric_xyz, dtype=float)
        if c.shape != (3,) or m.shape != (3,):
            raise DegenerateInput("CorrespondencePair: coordinates must be 3-vectors")
        if not (np.isfinite(c).all() and np.isfinite(m).all()):
            raise DegenerateInput("CorrespondencePair: non-finite coordinates")
        object.__setattr__(self, "point_cloud_xyz", c)
        object.__setattr__(self, "metric_xyz", m)


@dataclass(frozen=True)
class PlaneModel:
    """Plane {x : normal . x = offset} with consensus statistics."""

    normal: np.ndarray  # (3,) unit
    offset: float  # meters
    inlier_count: int
    inlier_rms: float  # meters


def _hypothesis_rng(seed: int, iteration: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(iteration,)))


def _ratio_pool(pairs: list[CorrespondencePair], seed: int):
    """All same-object pair ratios metric/cloud, subsampled to a fixed cap.

    Returns (ratios, index pairs); entries with cloud-space separation below
    MIN_PAIR_SEPARATION are kept out of the ratio array but remain sampleable
    as degenerate hypotheses (marked NaN).
    """
    by_object: dict[str, list[int]] = {}
    for i, p in enumerate(pairs):
        by_object.setdefault(p.object_id, []).append(i)
    idx_pairs = [
        (i, j)
        for members in by_object.values()
        for k, i in enumerate(members)
        for j in members[k + 1 :]
    ]
    if not idx_pairs:
        raise InsufficientPairs(
            "estimate_scale_ransac: need at least 2 correspondences on one object"
        )
    if len(idx_pairs) > MAX_RATIO_POOL:
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0xA11,)))
        keep = rng.choice(len(idx_pairs), size=MAX_RATIO_POOL, replace=False)
        idx_pairs = [idx_pairs[k] for k in np.sort(keep)]
    cloud = np.array([pairs[i].point_cloud_xyz - pairs[j].point_cloud_xyz for i, j in idx_pairs])
    metric = np.array([pairs[i].metric_xyz - pairs[j].metric_xyz for i, j in idx_pairs])
    cd = np.linalg.norm(cloud, axis=1)
    md = np.linalg.norm(metric, axis=1)
    ratios = np.where(cd > MIN_PAIR_SEPARATION, md / np.maximum(cd, MIN_PAIR_SEPARATION), np.nan)
    return ratios


def estimate_scale_ransac(
    pairs: list[CorrespondencePair],
    iterations: int = 1000,
    inlier_ratio_tolerance: float = 0.05,
    seed: int = 0,
) -> float:
    """Metric scale of the reconstruction from same-object distance ratios.

    Each hypothesis samples one same-object correspondence pair and proposes
    scale = |metric_i - metric_j| / |cloud_i - cloud_j|; its consensus is the
    set of pool ratios within the relative tolerance.  The final scale is the
    median ratio over the best consensus set.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if inlier_ratio_tolerance <= 0.0:
        raise ValueError("inlier_ratio_tolerance must be > 0")
    ratios = _ratio_pool(pairs, seed)
    valid = np.flatnonzero(np.isfinite(ratios))
    if valid.size == 0:
        raise InsufficientPairs(
            "estimate_scale_ransac: all same-object pairs are degenerate "
            "(cloud-space separation below 1e-6)"
        )
    n = ratios.size
    best_count = -1
    best_mask = None
    for it in range(iterations):
        k = int(_hypothesis_rng(seed, it).integers(n))
        r = ratios[k]
        if not np.isfinite(r):
            continue  # degenerate sample; the iteration is still consumed
        inliers = np.abs(ratios - r) <= inlier_ratio_tolerance * r
        count = int(np.count_nonzero(inliers))
        if count > best_count:
            best_count = count
            best_mask = inliers
    if best_mask is None:
        raise InsufficientPairs("estimate_scale_ransac: no non-degenerate hypothesis drawn")
    scale = float(np.median(ratios[best_mask & np.isfinite(ratios)]))
    if not (np.isfinite(scale) and scale > 0.0):
        raise NoConsensus(f"estimate_scale_ransac: non-positive consensus scale {scale}")
    return scale


def filter_cloud(
    cloud: PointCloud,
    confidence_min: float = 0.0,
    remove_object_pixels: bool = False,
    require_bbox: bool = False,
) -> PointCloud:
    """Keep confident background points, preserving order.

    Drops points below the confidence threshold, points labeled as object
    pixels (when requested), and points outside the predicted bounding box
    (when requested).  Raises EmptyResult if fewer than 50 points survive.
    """
    keep = cloud.confidence >= confidence_min
    if remove_object_pixels and cloud.label is not None:
        keep &= np.asarray(cloud.label) != LABEL_OBJECT
    if require_bbox and cloud.in_bbox is not None:
        keep &= np.asarray(cloud.in_bbox, dtype=bool)
    if int(np.count_nonzero(keep)) < MIN_PLANE_POINTS:
        raise EmptyResult(
            f"filter_cloud: only {int(np.count_nonzero(keep))} points survive "
            f"(need {MIN_PLANE_POINTS})"
        )
    return PointCloud(
        cloud.points[keep],
        cloud.confidence[keep],
        None if cloud.label is None else np.asarray(cloud.label)[keep],
        None if cloud.in_bbox is None else np.asarray(cloud.in_bbox)[keep],
    )


def fit_plane_ransac(
    cloud: PointCloud,
    iterations: int = 2000,
    inlier_threshold: float = 5e-3,
    seed: int = 0,
) -> PlaneModel:
    """Dominant plane of the cloud by 3-point RANSAC with least-squares
    refinement over the best consensus set.

    The returned normal is oriented so the camera origin lies on its positive
    side (the camera looks down at the table).  Raises NoConsensus when the
    best hypothesis explains less than 10% of the points.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if inlier_threshold <= 0.0:
        raise ValueError("inlier_threshold must be > 0")
    pts = cloud.points
    n = pts.shape[0]
    if n < 3:
        raise DegenerateInput("fit_plane_ransac: need at least 3 points")

    best_count = -1
    best_mask = None
    for it in range(iterations):
        idx = _hypothesis_rng(seed, it).choice(n, size=3, replace=False)
        p0, p1, p2 = pts[idx]
        normal = np.cross(p1 - p0, p2 - p0)
        norm = np.linalg.norm(normal)
        if norm < 1e-12:
            continue  # collinear sample; the iteration is still consumed
        normal = normal / norm
        offset = float(normal @ p0)
        inliers = np.abs(pts @ normal - offset) <= inlier_threshold
        count = int(np.count_nonzero(inliers))
        if count > best_count:
            best_count = count
            best_mask = inliers
    if best_mask is None or best_count < MIN_INLIER_FRACTION * n:
        raise NoConsensus(
            f"fit_plane_ransac: best consensus {max(best_count, 0)}/{n} "
            f"below {MIN_INLIER_FRACTION:.0%}"
        )

    # Least-squares refinement: the plane normal is the smallest-eigenvector
    # of the inlier covariance, the plane passes through the inlier centroid.
    inlier_pts = pts[best_mask]
    centroid = inlier_pts.mean(axis=0)
    centered = inlier_pts - centroid
    _, vecs = np.linalg.eigh(centered.T @ centered)
    normal = vecs[:, 0]
    offset = float(normal @ centroid)

    # Camera origin (0,0,0) on the positive side: n . 0 - offset > 0.
    if offset > 0.0:
        normal = -normal
        offset = -offset

    residuals = pts @ normal - offset
    final_mask = np.abs(residuals) <= inlier_threshold
    count = int(np.count_nonzero(final_mask))
    rms = float(np.sqrt(np.mean(residuals[final_mask] ** 2))) if count else float("inf")
    return PlaneModel(normal=normal, offset=offset, inlier_count=count, inlier_rms=rms)


def gravity_from_plane(plane: PlaneModel) -> np.ndarray:
    """Gravity direction implied by a horizontal support plane: straight from
    the camera side into the table, i.e. the negated plane normal."""
    return -np.asarray(plane.normal, dtype=float)


def plane_to_static_object(
    plane: PlaneModel, extent: float = 2.0, thickness: float = 0.1
) -> StaticObject:
    """Box-shaped static obstacle whose top face coincides with the plane.

    The box spans extent x extent laterally and sits entirely below the plane
    (on the side away from the camera).
    """
    if extent <= 0.0 or thickness <= 0.0:
        raise ValueError("extent and thickness must be > 0")
    n = np.asarray(plane.normal, dtype=float)
    n = n / np.linalg.norm(n)
    # deterministic tangent frame (u, v, n)
    ref = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(n, ref)
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    rotation = np.column_stack([u, v, n])
    half = extent / 2.0
    local = np.array(
        [[x, y, z] for x in (-half, half) for y in (-half, half) for z in (-thickness, 0.0)]
    )
    part = convex_hull(local)
    pose = Pose(rotation=rotation, translation=plane.offset * n)
    return StaticObject(name="support-plane", parts=[part], pose=pose)
