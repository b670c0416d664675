"""The three cost terms and their analytic gradients.

Total cost over the scene is a weighted sum, per movable object, of

* a pose term: half squared Mahalanobis distance of the current pose to the
  prior estimate, with a ray-aligned anisotropic translational covariance,
* a collision term: hinge over negative signed distances of convex part
  pairs, averaged over the colliding pairs,
* a gravity term: average positive distance of the object's parts to the
  closest static part below it, gated by a per-object support flag that is
  zero whenever the object touches anything.

All gradients are 6-vectors in the right-tangent convention of :mod:`se3`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import collision as col
from .errors import DegenerateRay
from .scene import CovarianceParams, MovableObject, PosePrior, Scene, StaticObject
from .se3 import Pose, log_jacobian_inv, log_so3

__all__ = [
    "build_covariance",
    "pose_cost_and_grad",
    "pairwise_collision_cost",
    "collision_cost_and_grad",
    "support_indicator",
    "select_gravity_target",
    "gravity_cost_and_grad",
    "total_cost_and_grad",
    "object_cost",
    "GradientSettings",
    "scene_diagnostics",
]

DEFAULT_NOISE_SCALE = 1e-3
DEFAULT_SAMPLE_COUNT = 32


@dataclass(frozen=True)
class GradientSettings:
    """How signed-distance gradients are estimated."""

    mode: str = "deterministic"  # or "smoothed"
    noise_scale: float = DEFAULT_NOISE_SCALE
    sample_count: int = DEFAULT_SAMPLE_COUNT
    seed: int = 0

    def pair_seed(self, *ids: int) -> int:
        # stable per-pair seed so parallel/reordered evaluation stays deterministic
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=tuple(int(i) & 0x7FFFFFFF for i in ids))
        return int(seq.generate_state(1)[0])


def _pair_grads(res, pose_a, pose_b, part_a, part_b, settings: GradientSettings, ids):
    if settings.mode == "deterministic":
        return col._deterministic_grads(res, pose_a, pose_b)
    return col.distance_gradient(
        part_a,
        pose_a,
        part_b,
        pose_b,
        noise_scale=settings.noise_scale,
        sample_count=settings.sample_count,
        seed=settings.pair_seed(*ids),
    )


# ---------------------------------------------------------------------------
# pose cost

def build_covariance(estimate: Pose, params: CovarianceParams) -> PosePrior:
    """Precision matrix of the pose prior.

    The translational covariance is diagonal in a frame whose z-axis points
    from the camera to the object center (sigma_z along the ray, sigma_xy
    across it); the rotational covariance is isotropic, so it is
    sigma_theta^2 * I in any frame.
    """
    t = estimate.translation
    depth = np.linalg.norm(t)
    if depth <= 1e-6:
        raise DegenerateRay("build_covariance: object center at camera origin")
    z = t / depth
    a = np.array([1.0, 0.0, 0.0]) if abs(z[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    x = a - (a @ z) * z
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    r_cc = np.column_stack([x, y, z])
    prec_t = r_cc @ np.diag([params.sigma_xy**-2, params.sigma_xy**-2, params.sigma_z**-2]) @ r_cc.T
    precision = np.zeros((6, 6))
    precision[:3, :3] = prec_t
    precision[3:, 3:] = np.eye(3) / params.sigma_theta**2
    precision = 0.5 * (precision + precision.T)
    return PosePrior(estimate, precision)


def pose_residual(current: Pose, prior: PosePrior) -> np.ndarray:
    """6-vector residual (t - t_est, log(R_est^T R))."""
    dt = current.translation - prior.estimate.translation
    dr = log_so3(prior.estimate.rotation.T @ current.rotation)
    return np.concatenate([dt, dr])


def pose_cost_and_grad(current: Pose, prior: PosePrior):
    """Half squared Mahalanobis distance to the prior and its gradient.

    The right-tangent Jacobian of the residual is block-diagonal:
    the rotation for the translational block and the inverse right-Jacobian
    of the SO(3) log for the rotational block.
    """
    e = pose_residual(current, prior)
    he = prior.precision @ e
    cost = 0.5 * float(e @ he)
    jac = np.zeros((6, 6))
    jac[:3, :3] = current.rotation
    jac[3:, 3:] = log_jacobian_inv(e[3:])
    grad = he @ jac
    return cost, grad


# ---------------------------------------------------------------------------
# collision cost

def _object_pairs(parts_a, pose_a, parts_b, pose_b, margin):
    """Signed distances for part pairs surviving the broad phase."""
    out = []
    for i, pa in enumerate(parts_a):
        for j, pb in enumerate(parts_b):
            if not col.spheres_within_margin(pa, pose_a, pb, pose_b, margin):
                continue
            res = col.signed_distance(pa, pose_a, pb, pose_b)
            out.append((i, j, res))
    return out


def pairwise_collision_cost(
    parts_a,
    pose_a: Pose,
    parts_b,
    pose_b: Pose,
    margin: float = 0.05,
    settings: GradientSettings | None = None,
    with_grad: bool = True,
    pair_ids=(0, 0),
):
    """Hinge collision cost between two objects and gradients per object.

    cost = (1/n_col) * sum of penetration depths over colliding part pairs;
    zero (with zero gradients) when no pair penetrates.
    """
    settings = settings or GradientSettings()
    colliding = [
        (i, j, res)
        for i, j, res in _object_pairs(parts_a, pose_a, parts_b, pose_b, margin)
        if res.signed_distance < 0.0
    ]
    grad_a = np.zeros(6)
    grad_b = np.zeros(6)
    if not colliding:
        return 0.0, grad_a, grad_b
    n_col = len(colliding)
    cost = sum(-res.signed_distance for _, _, res in colliding) / n_col
    if with_grad:
        for i, j, res in colliding:
            ga, gb = _pair_grads(
                res, pose_a, pose_b, parts_a[i], parts_b[j], settings, (*pair_ids, i, j)
            )
            grad_a -= ga / n_col
            grad_b -= gb / n_col
    return cost, grad_a, grad_b


def collision_cost_and_grad(
    i: int,
    scene: Scene,
    poses: list[Pose] | None = None,
    settings: GradientSettings | None = None,
):
    """Collision cost of movable ``i`` against every other object, and its
    gradient w.r.t. object ``i``'s pose only."""
    poses = poses or scene.poses()
    obj = scene.movables[i]
    cost = 0.0
    grad = np.zeros(6)
    for j, other in enumerate(scene.movables):
        if j == i:
            continue
        c, ga, _ = pairwise_collision_cost(
            obj.parts, poses[i], other.parts, poses[j],
            margin=scene.activation_margin, settings=settings, pair_ids=(i, j),
        )
        cost += c
        grad += ga
    for k, stat in enumerate(scene.statics):
        c, ga, _ = pairwise_collision_cost(
            obj.parts, poses[i], stat.parts, stat.pose,
            margin=scene.activation_margin, settings=settings, pair_ids=(i, 1000 + k),
        )
        cost += c
        grad += ga
    return cost, grad


# ---------------------------------------------------------------------------
# support indicator and gravity cost

def _min_distance_to_others(i: int, scene: Scene, poses) -> float:
    obj = scene.movables[i]
    best = np.inf
    others = [(other.parts, poses[j]) for j, other in enumerate(scene.movables) if j != i]
    others += [(stat.parts, stat.pose) for stat in scene.statics]
    for parts_b, pose_b in others:
        for _, _, res in _object_pairs(obj.parts, poses[i], parts_b, pose_b, scene.activation_margin):
            best = min(best, res.signed_distance)
    return best


def support_indicator(i: int, scene: Scene, poses=None, contact_tolerance=None) -> int:
    """0 iff object ``i`` is in contact/collision with any other object
    (minimum pairwise signed distance below the contact tolerance)."""
    poses = poses or scene.poses()
    tol = scene.contact_tolerance if contact_tolerance is None else contact_tolerance
    return 0 if _min_distance_to_others(i, scene, poses) < tol else 1


def _ray_hits_part(origin, direction, part, pose):
    """Entry parameter t >= 0 of the ray against a convex part, or None."""
    o = pose.rotation.T @ (origin - pose.translation)
    d = pose.rotation.T @ direction
    t_enter, t_exit = -np.inf, np.inf
    for n, off in zip(part.normals, part.offsets):
        denom = n @ d
        num = off - n @ o
        if abs(denom) < 1e-14:
            if num < 0.0:
                return None
            continue
        t = num / denom
        if denom > 0.0:
            t_exit = min(t_exit, t)
        else:
            t_enter = max(t_enter, t)
    if t_enter > t_exit or t_exit < 0.0:
        return None
    return max(t_enter, 0.0)


def select_gravity_target(i: int, scene: Scene, poses=None):
    """Static part hit first by the ray from the object centroid along the
    gravity direction: (static_index, part_index), or None if the ray
    misses every static part (the object hangs over an edge)."""
    poses = poses or scene.poses()
    obj = scene.movables[i]
    centroids = np.array([p.centroid for p in obj.parts])
    origin = centroids.mean(axis=0) @ poses[i].rotation.T + poses[i].translation
    best = None
    for k, stat in enumerate(scene.statics):
        for pi, part in enumerate(stat.parts):
            t = _ray_hits_part(origin, scene.gravity_dir, part, stat.pose)
            if t is not None and (best is None or t < best[0]):
                best = (t, k, pi)
    if best is None:
        return None
    return best[1], best[2]


def gravity_cost_and_grad(
    i: int,
    scene: Scene,
    poses=None,
    delta: int | None = None,
    target=None,
    settings: GradientSettings | None = None,
    with_grad: bool = True,
):
    """Gravity cost of movable ``i`` and its gradient.

    Averages the positive signed distances of the object's parts to the
    supporting static part below it; disabled entirely (cost and gradient
    zero) when the support flag delta is 0 or no static part lies below.
    """
    poses = poses or scene.poses()
    if delta is None:
        delta = support_indicator(i, scene, poses)
    if target is None:
        target = select_gravity_target(i, scene, poses)
    grad = np.zeros(6)
    if delta == 0 or target is None:
        return 0.0, grad
    stat = scene.statics[target[0]]
    part_b = stat.parts[target[1]]
    obj = scene.movables[i]
    cost = 0.0
    for pi, part in enumerate(obj.parts):
        res = col.signed_distance(part, poses[i], part_b, stat.pose)
        if res.signed_distance > 0.0:
            cost += res.signed_distance
            if with_grad:
                ga, _ = _pair_grads(
                    res, poses[i], stat.pose, part, part_b,
                    settings or GradientSettings(), (i, 2000 + target[0], pi, target[1]),
                )
                grad += ga
    n = len(obj.parts)
    return cost / n, grad / n


# ---------------------------------------------------------------------------
# total cost

def compute_structure(scene: Scene, poses=None):
    """Support flags and gravity targets at the current poses.

    Recomputed once per optimizer iteration and held constant inside the
    line search (the flags are treated as constants in the gradients).
    """
    poses = poses or scene.poses()
    deltas = [support_indicator(i, scene, poses) for i in range(len(scene.movables))]
    targets = [select_gravity_target(i, scene, poses) for i in range(len(scene.movables))]
    return deltas, targets


def total_cost_and_grad(
    scene: Scene,
    poses=None,
    deltas=None,
    targets=None,
    settings: GradientSettings | None = None,
    with_grad: bool = True,
):
    """Weighted total cost summed over movables and per-movable gradients.

    Each movable's gradient accumulates its pose term, its gravity term and
    every collision pair it participates in (including pairs where it is
    the second endpoint).  Movable-movable pairs are counted once per
    endpoint object, following the per-object sum of the total cost.
    """
    poses = poses or scene.poses()
    settings = settings or GradientSettings()
    if deltas is None or targets is None:
        deltas, targets = compute_structure(scene, poses)
    n = len(scene.movables)
    grads = [np.zeros(6) for _ in range(n)]
    total = 0.0

    for i, obj in enumerate(scene.movables):
        c, g = pose_cost_and_grad(poses[i], obj.prior)
        total += c
        if with_grad:
            grads[i] += g

    zc = scene.weights.collision
    if zc > 0.0:
        for i in range(n):
            for j in range(i + 1, n):
                c, ga, gb = pairwise_collision_cost(
                    scene.movables[i].parts, poses[i],
                    scene.movables[j].parts, poses[j],
                    margin=scene.activation_margin, settings=settings,
                    with_grad=with_grad, pair_ids=(i, j),
                )
                total += 2.0 * zc * c  # pair appears in both objects' sums
                if with_grad:
                    grads[i] += 2.0 * zc * ga
                    grads[j] += 2.0 * zc * gb
            for k, stat in enumerate(scene.statics):
                c, ga, _ = pairwise_collision_cost(
                    scene.movables[i].parts, poses[i], stat.parts, stat.pose,
                    margin=scene.activation_margin, settings=settings,
                    with_grad=with_grad, pair_ids=(i, 1000 + k),
                )
                total += zc * c
                if with_grad:
                    grads[i] += zc * ga

    zg = scene.weights.gravity
    if zg > 0.0:
        for i in range(n):
            c, g = gravity_cost_and_grad(
                i, scene, poses, deltas[i], targets[i], settings, with_grad=with_grad
            )
            total += zg * c
            if with_grad:
                grads[i] += zg * g

    return total, grads


def object_cost(i: int, scene: Scene, poses, deltas, targets) -> float:
    """The part of the total cost that depends on movable ``i``'s pose.

    Matches :func:`total_cost_and_grad` up to terms constant in pose ``i``
    (other objects' pose/gravity terms and pairs not involving ``i``), so it
    can drive a line search over object ``i`` alone.
    """
    total, _ = pose_cost_and_grad(poses[i], scene.movables[i].prior)
    zc = scene.weights.collision
    if zc > 0.0:
        for j in range(len(scene.movables)):
            if j == i:
                continue
            c, _, _ = pairwise_collision_cost(
                scene.movables[i].parts, poses[i],
                scene.movables[j].parts, poses[j],
                margin=scene.activation_margin, with_grad=False,
            )
            total += 2.0 * zc * c  # the pair appears in both objects' sums
        for stat in scene.statics:
            c, _, _ = pairwise_collision_cost(
                scene.movables[i].parts, poses[i], stat.parts, stat.pose,
                margin=scene.activation_margin, with_grad=False,
            )
            total += zc * c
    if scene.weights.gravity > 0.0:
        c, _ = gravity_cost_and_grad(
            i, scene, poses, deltas[i], targets[i], with_grad=False
        )
        total += scene.weights.gravity * c
    return total


def scene_diagnostics(scene: Scene, poses=None):
    """Per-movable residual penetration depth and support gap (meters).

    The support gap is the distance of the object to the static part below
    it (0 when touching/penetrating), or NaN when no static part lies below.
    """
    poses = poses or scene.poses()
    n = len(scene.movables)
    penetration = np.zeros(n)
    gap = np.full(n, np.nan)
    for i, obj in enumerate(scene.movables):
        worst = 0.0
        others = [(scene.movables[j].parts, poses[j]) for j in range(n) if j != i]
        others += [(s.parts, s.pose) for s in scene.statics]
        for parts_b, pose_b in others:
            for _, _, res in _object_pairs(obj.parts, poses[i], parts_b, pose_b, scene.activation_margin):
                worst = min(worst, res.signed_distance)
        penetration[i] = -worst
        target = select_gravity_target(i, scene, poses)
        if target is not None:
            stat = scene.statics[target[0]]
            part_b = stat.parts[target[1]]
            d = min(
                col.signed_distance(p, poses[i], part_b, stat.pose).signed_distance
                for p in obj.parts
            )
            gap[i] = max(d, 0.0)
    return penetration, gap
