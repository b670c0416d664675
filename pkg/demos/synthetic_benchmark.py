"""Walkthrough: measuring what refinement buys on synthetic desk scenes.

Generates tabletop scenes with depth-heavy pose noise, refines them, and
reports mean MSSD (surface distance) and MSPD (pixel distance) before and
after.  The expected picture: MSSD drops substantially because depth errors
are corrected, while MSPD barely moves because depth errors were nearly
invisible in pixels to begin with.
"""

import argparse

import numpy as np

from scenerefine.metrics import eval_mspd, eval_mssd
from scenerefine.optimizer import refine_scene
from scenerefine.sceneio import CameraIntrinsics
from scenerefine.synth import generate_synthetic_scene

CAMERA = CameraIntrinsics(fx=600.0, fy=600.0, cx=320.0, cy=240.0)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenes", type=int, default=10, help="number of scenes")
    parser.add_argument("--seed", type=int, default=0, help="first scene seed")
    args = parser.parse_args()

    prior_mssd, post_mssd, prior_mspd, post_mspd = [], [], [], []
    for k in range(args.scenes):
        scene, gt = generate_synthetic_scene(args.seed + k, object_count=3 + (k % 4))
        report = refine_scene(scene)
        for obj, truth, refined in zip(scene.movables, gt, report.final_poses):
            vertices = obj.parts[0].vertices
            prior_mssd.append(eval_mssd(obj.pose, truth, vertices))
            post_mssd.append(eval_mssd(refined, truth, vertices))
            prior_mspd.append(eval_mspd(obj.pose, truth, vertices, None, CAMERA))
            post_mspd.append(eval_mspd(refined, truth, vertices, None, CAMERA))
        print(f"scene {args.seed + k}: {len(scene.movables)} objects, "
              f"{report.iterations} iterations, {report.termination}")

    pm, qm = np.mean(prior_mssd), np.mean(post_mssd)
    pp, qp = np.mean(prior_mspd), np.mean(post_mspd)
    print()
    print(f"objects scored: {len(prior_mssd)}")
    print(f"mean MSSD: {pm * 1e3:7.2f} mm -> {qm * 1e3:7.2f} mm "
          f"({(pm - qm) / pm:+.1%} reduction)")
    print(f"mean MSPD: {pp:7.2f} px -> {qp:7.2f} px "
          f"({(pp - qp) / pp:+.1%} change)")


if __name__ == "__main__":
    main()
