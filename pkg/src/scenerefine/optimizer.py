"""Joint refinement of all movable poses by manifold gradient descent.

Per iteration: recompute the support flags and gravity targets, evaluate the
total cost and per-object gradients, then sweep over the movables, giving
each a backtracking (Armijo) step T <- T * exp(-alpha * d) against the part
of the cost its own pose controls, where d is the gradient preconditioned by
the object's prior covariance.  The flags are frozen inside the sweep, so
each iteration descends on one piece of the piecewise cost landscape.

Per-object steps matter near contact: the collision hinge has a gradient of
fixed magnitude however shallow the penetration, so an object pinned at a
contact kink would otherwise poison a joint line search and freeze objects
that still have ground to cover.  The preconditioning matters under oblique
viewing: the ray-aligned prior is orders of magnitude looser along the ray
than across it, and raw gradient steps zigzag in that valley instead of
descending it.  When a support-flag flip raises the cost between
iterations, the flipped objects' step scales are halved, which damps
contact flip-flop near the physically consistent fixed point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .costs import (
    GradientSettings,
    compute_structure,
    object_cost,
    scene_diagnostics,
    total_cost_and_grad,
)
from .errors import NonFiniteCost
from .scene import Scene
from .se3 import Pose, retract

__all__ = ["OptimizerConfig", "RefinementReport", "refine_scene", "step", "line_search"]

ARMIJO_C1 = 1e-4
BACKTRACK_FACTOR = 0.5
MAX_BACKTRACKS = 8
DIVERGENCE_FACTOR = 1e6


@dataclass(frozen=True)
class OptimizerConfig:
    step_size: float = 1.0
    max_iterations: int = 300
    cost_tolerance: float = 1e-8  # absolute cost decrease per iteration
    gradient_tolerance: float = 1e-5  # inf-norm of the stacked gradient
    collision_gradient_mode: str = "deterministic"  # or "smoothed"
    smoothing_noise: float = 1e-3
    smoothing_samples: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.step_size <= 0.0 or self.max_iterations < 1:
            raise ValueError("step_size must be > 0 and max_iterations >= 1")
        if self.cost_tolerance < 0.0 or self.gradient_tolerance < 0.0:
            raise ValueError("tolerances must be >= 0")
        if self.collision_gradient_mode not in ("deterministic", "smoothed"):
            raise ValueError("collision_gradient_mode must be deterministic|smoothed")


@dataclass
class RefinementReport:
    cost_trace: np.ndarray  # length = iterations + 1
    final_poses: list[Pose]
    iterations: int
    termination: str
    penetration: np.ndarray  # per movable, meters
    support_gap: np.ndarray  # per movable, meters (NaN: nothing below)
    warnings: list[str] = field(default_factory=list)


def step(scene: Scene, poses, grads, step_size: float):
    """One right-tangent retraction per movable; statics untouched."""
    return [retract(p, -step_size * g) for p, g in zip(poses, grads)]


def line_search(cost_fn, poses_fn, cost0, grads, initial_step: float) -> float:
    """Backtracking Armijo search along the negative gradient.

    Returns the accepted step (0.0 when no backtracked step makes
    sufficient progress).
    """
    gnorm2 = sum(float(g @ g) for g in grads)
    if gnorm2 == 0.0:
        return 0.0
    alpha = initial_step
    for _ in range(MAX_BACKTRACKS + 1):
        trial = cost_fn(poses_fn(alpha))
        if np.isfinite(trial) and trial <= cost0 - ARMIJO_C1 * alpha * gnorm2:
            return alpha
        alpha *= BACKTRACK_FACTOR
    return 0.0


def _settings(config: OptimizerConfig, seed: int) -> GradientSettings:
    return GradientSettings(
        mode=config.collision_gradient_mode,
        noise_scale=config.smoothing_noise,
        sample_count=config.smoothing_samples,
        seed=seed,
    )


def _object_step(scene, poses, deltas, targets, i, direction, slope, initial_step):
    """Armijo line search moving only object ``i`` along ``-direction``;
    ``slope`` is the local decrease rate grad . direction.  Returns the
    accepted pose or None."""
    if slope <= 0.0:
        return None
    cost0 = object_cost(i, scene, poses, deltas, targets)
    alpha = initial_step
    trial_poses = list(poses)
    for _ in range(MAX_BACKTRACKS + 1):
        trial_poses[i] = retract(poses[i], -alpha * direction)
        trial = object_cost(i, scene, trial_poses, deltas, targets)
        if np.isfinite(trial) and trial <= cost0 - ARMIJO_C1 * alpha * slope:
            return trial_poses[i]
        alpha *= BACKTRACK_FACTOR
    return None


def _sweep(scene, poses, deltas, targets, grads, metrics, config, step_scales):
    """One Gauss-Seidel pass over the movables; mutates poses in place and
    returns whether any object moved.

    Each object's step is preconditioned by the inverse of its prior
    precision: the ray-aligned covariance is orders of magnitude looser
    along the viewing ray than across it, and a raw gradient step zigzags
    in that valley instead of descending it.
    """
    moved = False
    for i, grad in enumerate(grads):
        # tangent translations are body-frame (t <- t + R rho), so the
        # camera-frame covariance must be conjugated by the current rotation
        sigma_t, sigma_theta2 = metrics[i]
        rot = poses[i].rotation
        direction = np.concatenate(
            [rot.T @ (sigma_t @ (rot @ grad[:3])), sigma_theta2 * grad[3:]]
        )
        slope = float(grad @ direction)
        accepted = _object_step(
            scene, poses, deltas, targets, i, direction, slope,
            config.step_size * step_scales[i],
        )
        if accepted is None and step_scales[i] < 1.0:
            # accumulated flip damping can shrink steps below float
            # resolution while the object still has ground to cover
            step_scales[i] = 1.0
            accepted = _object_step(
                scene, poses, deltas, targets, i, direction, slope, config.step_size
            )
        if accepted is not None:
            poses[i] = accepted
            moved = True
    return moved


def refine_scene(scene: Scene, config: OptimizerConfig | None = None) -> RefinementReport:
    """Minimize the total cost over all movable poses.

    Deterministic for a fixed scene, config and seed; the accepted-cost
    sequence recorded in the trace is non-increasing as long as the contact
    structure stays fixed.
    """
    config = config or OptimizerConfig()
    poses = scene.poses()
    n = len(poses)
    warnings: list[str] = []

    deltas, targets = compute_structure(scene, poses)
    for i, t in enumerate(targets):
        if t is None:
            warnings.append(
                f"no static part below object '{scene.movables[i].name}'; gravity cost disabled"
            )

    # per-object step metric: the prior covariance (translational block in
    # the camera frame, isotropic rotational variance)
    metrics = [
        (
            np.linalg.inv(m.prior.precision[:3, :3]),
            1.0 / float(m.prior.precision[3, 3]),
        )
        for m in scene.movables
    ]

    settings = _settings(config, config.seed)
    cost0, grads = total_cost_and_grad(scene, poses, deltas, targets, settings)
    if not np.isfinite(cost0) or not all(np.isfinite(g).all() for g in grads):
        raise NonFiniteCost("initial cost/gradient evaluation is non-finite")

    trace = [cost0]
    iterations = 0
    termination = "max_iterations"
    step_scales = [1.0] * n
    cost_prev = cost0
    initial_cost = cost0

    for it in range(1, config.max_iterations + 1):
        gmax = max((np.abs(g).max() for g in grads), default=0.0)
        if gmax <= config.gradient_tolerance:
            termination = "gradient_converged"
            break

        moved = _sweep(scene, poses, deltas, targets, grads, metrics, config, step_scales)
        if not moved and config.collision_gradient_mode == "smoothed":
            # one fresh noise draw before declaring no progress
            settings = _settings(config, config.seed + it)
            _, grads = total_cost_and_grad(scene, poses, deltas, targets, settings)
            moved = _sweep(scene, poses, deltas, targets, grads, metrics, config, step_scales)
        if not moved:
            termination = "no_progress"
            break

        cost_acc, _ = total_cost_and_grad(
            scene, poses, deltas, targets, settings, with_grad=False
        )
        if not np.isfinite(cost_acc):
            termination = "non_finite"
            warnings.append("cost became non-finite; returning last finite state")
            break
        trace.append(cost_acc)
        iterations = it
        if cost_acc > DIVERGENCE_FACTOR * max(initial_cost, 1e-12):
            termination = "diverged"
            warnings.append("cost exceeded divergence guard")
            break
        if cost_prev - cost_acc < config.cost_tolerance:
            termination = "cost_converged"
            break

        # next iteration: refresh the contact structure
        old_deltas, old_targets = deltas, targets
        deltas, targets = compute_structure(scene, poses)
        cost_new, grads = total_cost_and_grad(scene, poses, deltas, targets, settings)
        if not np.isfinite(cost_new) or not all(np.isfinite(g).all() for g in grads):
            termination = "non_finite"
            warnings.append("gradient became non-finite; returning last finite state")
            break
        if cost_new > cost_acc + 1e-12:
            # a structure flip raised the cost: damp the flipped objects
            flipped = [
                i
                for i in range(n)
                if deltas[i] != old_deltas[i] or targets[i] != old_targets[i]
            ]
            for i in flipped or range(n):
                step_scales[i] *= 0.5
        cost_prev = cost_new

    penetration, gap = scene_diagnostics(scene, poses)
    return RefinementReport(
        cost_trace=np.asarray(trace),
        final_poses=poses,
        iterations=iterations,
        termination=termination,
        penetration=penetration,
        support_gap=gap,
        warnings=warnings,
    )
