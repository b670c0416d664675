"""Command-line surface: refine, scene-geom, eval, synth, collisions.

Exit codes: 0 on success, 1 for input errors (malformed files, missing
meshes, bad values), 2 for numerical failures (non-convergence, degenerate
estimation).  All randomness is controlled by ``--seed``.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import errors
from .meshio import load_point_cloud_ply
from .metrics import eval_mspd, eval_mssd, load_symmetries
from .optimizer import OptimizerConfig, refine_scene
from .scenegeom import estimate_scale_ransac, fit_plane_ransac, gravity_from_plane
from .sceneio import (
    collision_report,
    load_correspondences_csv,
    load_report,
    load_scene_file,
    write_json_atomic,
    write_report,
)
from .synth import write_synthetic_scene

INPUT_ERRORS = (
    errors.ParseError,
    errors.MissingMesh,
    errors.InvalidQuaternion,
    errors.IoError,
    errors.DegenerateInput,
    errors.EmptyResult,
    errors.InsufficientPairs,
    FileNotFoundError,
)
NUMERICAL_ERRORS = (
    errors.IterationLimit,
    errors.NonFiniteCost,
    errors.NoConsensus,
    errors.PlacementFailure,
    errors.DegenerateRay,
    errors.BehindCamera,
)


def _cmd_refine(args) -> int:
    sf = load_scene_file(args.scene)
    cfg = sf.optimizer
    overrides = {}
    if args.max_iters is not None:
        overrides["max_iterations"] = args.max_iters
    if args.step is not None:
        overrides["step_size"] = args.step
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.smoothed_collisions:
        overrides["collision_gradient_mode"] = "smoothed"
    if overrides:
        from dataclasses import replace

        cfg = replace(cfg, **overrides)
    report = refine_scene(sf.scene, cfg)
    write_report(report, sf.scene, args.out)
    print(
        f"refined {len(sf.scene.movables)} object(s): {report.iterations} iterations, "
        f"termination {report.termination}, final cost {report.cost_trace[-1]:.6g}"
    )
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 0


def _cmd_scene_geom(args) -> int:
    cloud = load_point_cloud_ply(args.cloud)
    pairs = load_correspondences_csv(args.corr)
    scale = estimate_scale_ransac(
        pairs, iterations=args.scale_iters, seed=args.seed
    )
    plane = fit_plane_ransac(
        cloud,
        iterations=args.plane_iters,
        inlier_threshold=args.inlier_mm * 1e-3,
        seed=args.seed,
    )
    gravity = gravity_from_plane(plane)
    write_json_atomic(
        args.out,
        {
            "normal": [float(x) for x in plane.normal],
            "offset": plane.offset,
            "inlier_count": plane.inlier_count,
            "inlier_rms": plane.inlier_rms,
            "scale": scale,
            "gravity": [float(x) for x in gravity],
        },
    )
    print(
        f"plane: normal=({plane.normal[0]:.4f}, {plane.normal[1]:.4f}, "
        f"{plane.normal[2]:.4f}) offset={plane.offset:.4f} m "
        f"inliers={plane.inlier_count} rms={plane.inlier_rms * 1e3:.3f} mm; "
        f"scale={scale:.6g}"
    )
    return 0


def _cmd_eval(args) -> int:
    sf = load_scene_file(args.scene)
    gt = load_report(args.gt)
    gt_by_name = {rec["name"]: pose for rec, pose in zip(gt["objects"], gt["poses"])}
    syms = load_symmetries(args.symmetries) if args.symmetries else {}
    poses = {m.name: m.pose for m in sf.scene.movables}
    if args.report:
        rep = load_report(args.report)
        for rec, pose in zip(rep["objects"], rep["poses"]):
            if rec["name"] in poses:
                poses[rec["name"]] = pose
    rows = []
    for m in sf.scene.movables:
        if m.name not in gt_by_name:
            raise errors.ParseError(f"{args.gt}: no ground-truth pose for '{m.name}'")
        vertices = np.vstack([p.vertices for p in m.parts])
        sym = syms.get(m.name)
        mssd = eval_mssd(poses[m.name], gt_by_name[m.name], vertices, sym)
        if sf.camera is None:
            raise errors.ParseError(f"{args.scene}: eval needs camera intrinsics")
        mspd = eval_mspd(poses[m.name], gt_by_name[m.name], vertices, sym, sf.camera)
        rows.append((m.name, mssd, mspd))
    tmp = args.out + ".tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["object_id", "mssd_m", "mspd_px"])
        for name, mssd, mspd in rows:
            writer.writerow([name, f"{mssd:.9g}", f"{mspd:.9g}"])
    os.replace(tmp, args.out)
    for name, mssd, mspd in rows:
        print(f"{name}: MSSD {mssd * 1e3:.2f} mm, MSPD {mspd:.2f} px")
    return 0


def _cmd_synth(args) -> int:
    write_synthetic_scene(args.out, args.gt, args.seed, args.objects)
    print(f"wrote {args.out} (+meshes) and {args.gt} with {args.objects} object(s)")
    return 0


def _cmd_collisions(args) -> int:
    scene = load_scene_file(args.scene).scene
    rows = collision_report(scene)
    if not rows:
        print("no penetrating part pairs")
        return 0
    print(f"{'object_a':<16} {'part':>4} {'object_b':<16} {'part':>4} {'depth_m':>10}")
    for r in rows:
        print(
            f"{r['object_a']:<16} {r['part_a']:>4} {r['object_b']:<16} "
            f"{r['part_b']:>4} {r['depth_m']:>10.6f}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scenerefine",
        description="Physical-consistency refinement of 6D object poses.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("refine", help="refine all movable poses in a scene")
    p.add_argument("--scene", required=True, help="scene JSON file")
    p.add_argument("--out", required=True, help="output report JSON")
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--smoothed-collisions", action="store_true")
    p.set_defaults(func=_cmd_refine)

    p = sub.add_parser("scene-geom", help="estimate metric scale and support plane")
    p.add_argument("--cloud", required=True, help="point cloud PLY")
    p.add_argument("--corr", required=True, help="correspondence CSV")
    p.add_argument("--out", required=True, help="output plane JSON")
    p.add_argument("--scale-iters", type=int, default=1000)
    p.add_argument("--plane-iters", type=int, default=2000)
    p.add_argument("--inlier-mm", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_scene_geom)

    p = sub.add_parser("eval", help="MSSD/MSPD of scene poses against ground truth")
    p.add_argument("--scene", required=True)
    p.add_argument("--gt", required=True, help="ground-truth pose JSON")
    p.add_argument("--symmetries", default=None, help="symmetry JSON")
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--report", default=None, help="score a refinement report's poses instead")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic desk scene")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--objects", type=int, default=4)
    p.add_argument("--out", required=True, help="output scene JSON")
    p.add_argument("--gt", required=True, help="output ground-truth JSON")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("collisions", help="print the penetrating part pairs of a scene")
    p.add_argument("--scene", required=True)
    p.set_defaults(func=_cmd_collisions)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NUMERICAL_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
