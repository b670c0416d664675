"""Surface- and pixel-distance metrics with symmetry handling, plus the
recall threshold grids and the symmetry file format."""

import json

import numpy as np
import pytest

from conftest import pose_xyz
from scenerefine.errors import BehindCamera, DegenerateInput
from scenerefine.metrics import (
    MSPD_THRESHOLDS,
    MSSD_THRESHOLDS,
    EvalRecord,
    SymmetrySet,
    eval_mspd,
    eval_mssd,
    load_symmetries,
)
from scenerefine.sceneio import CameraIntrinsics
from scenerefine.se3 import Pose, exp_so3

CUBE = np.array(
    [[x, y, z] for x in (-0.05, 0.05) for y in (-0.05, 0.05) for z in (-0.05, 0.05)]
)
CAM = CameraIntrinsics(fx=500.0, fy=500.0, cx=320.0, cy=240.0)


class TestMssd:
    def test_zero_at_ground_truth(self):
        pose = pose_xyz(0.1, 0.2, 1.0, axis_angle=[0.3, 0, 0])
        assert eval_mssd(pose, pose, CUBE) <= 1e-12

    def test_pure_translation(self):
        t = np.array([0.03, -0.04, 0.12])
        est = Pose(np.eye(3), t)
        gt = Pose(np.eye(3), np.zeros(3))
        assert abs(eval_mssd(est, gt, CUBE) - np.linalg.norm(t)) <= 1e-12

    def test_discrete_symmetry_absorbs_rotation(self):
        # 180-degree z-symmetric object rotated 180 degrees about z scores 0
        gt = pose_xyz(0, 0, 1.0)
        est = Pose(exp_so3(np.array([0, 0, np.pi])), gt.translation)
        flip = Pose(exp_so3(np.array([0, 0, np.pi])), np.zeros(3))
        sym = SymmetrySet(discrete=(flip,))
        assert eval_mssd(est, gt, CUBE, sym) <= 1e-12
        assert eval_mssd(est, gt, CUBE) > 0.05  # without the symmetry

    def test_continuous_symmetry(self):
        # ring of vertices about z: any z-spin of the estimate scores ~0
        angles = np.linspace(0, 2 * np.pi, 12, endpoint=False)
        ring = np.column_stack([np.cos(angles) * 0.05, np.sin(angles) * 0.05, np.zeros(12)])
        gt = pose_xyz(0, 0, 1.0)
        spin = 2 * np.pi / 12  # aligns with one of the 12 sampled symmetry angles
        est = Pose(exp_so3(np.array([0, 0, spin])), gt.translation)
        sym = SymmetrySet(continuous_axis=np.array([0, 0, 1.0]), continuous_samples=12)
        assert eval_mssd(est, gt, ring, sym) <= 1e-12

    def test_empty_vertices_rejected(self):
        with pytest.raises(DegenerateInput):
            eval_mssd(pose_xyz(), pose_xyz(), np.zeros((0, 3)))


class TestMspd:
    def test_zero_at_ground_truth(self):
        pose = pose_xyz(0.1, 0.0, 1.0)
        assert eval_mspd(pose, pose, CUBE, None, CAM) == 0.0

    def test_lateral_shift_pixel_scale(self):
        # 1 cm lateral shift at 1 m with fx = 500 is about 5 px
        gt = pose_xyz(0, 0, 1.0)
        est = pose_xyz(0.01, 0, 1.0)
        px = eval_mspd(est, gt, CUBE, None, CAM)
        assert abs(px - 5.0) <= 0.6  # vertex depths vary within the cube

    def test_behind_camera(self):
        with pytest.raises(BehindCamera):
            eval_mspd(pose_xyz(0, 0, -1.0), pose_xyz(0, 0, 1.0), CUBE, None, CAM)

    def test_depth_error_is_cheap_in_pixels(self):
        # the paper's motivation: depth-axis error barely moves projections
        gt = pose_xyz(0, 0, 1.0)
        est_depth = pose_xyz(0, 0, 1.05)
        est_lateral = pose_xyz(0.05, 0, 1.0)
        assert eval_mspd(est_depth, gt, CUBE, None, CAM) < 0.2 * eval_mspd(
            est_lateral, gt, CUBE, None, CAM
        )


class TestThresholdGrids:
    def test_mssd_grid(self):
        assert len(MSSD_THRESHOLDS) == 10
        assert abs(MSSD_THRESHOLDS[0] - 0.05) <= 1e-12
        assert abs(MSSD_THRESHOLDS[-1] - 0.50) <= 1e-12

    def test_mspd_grid(self):
        assert len(MSPD_THRESHOLDS) == 10
        assert MSPD_THRESHOLDS[0] == 5.0 and MSPD_THRESHOLDS[-1] == 50.0

    def test_eval_record_recall(self):
        rec = EvalRecord("obj", mssd_m=0.012, mspd_px=12.0, diameter_m=0.1)
        # 0.012 < t * 0.1 first holds at t = 0.15 (index 2)
        assert rec.mssd_recall == [False, False] + [True] * 8
        assert rec.mspd_recall == [False, False] + [True] * 8

    def test_eval_record_rejects_negative(self):
        with pytest.raises(ValueError):
            EvalRecord("obj", mssd_m=-1.0, mspd_px=0.0, diameter_m=0.1)


class TestSymmetryFile:
    def test_load(self, tmp_path):
        path = tmp_path / "sym.json"
        path.write_text(
            json.dumps(
                {
                    "mug": {
                        "discrete": [
                            {"translation": [0, 0, 0], "quaternion_wxyz": [0, 0, 0, 1]}
                        ]
                    },
                    "can": {"continuous_axis": [0, 0, 1], "continuous_samples": 16},
                }
            )
        )
        syms = load_symmetries(str(path))
        assert len(syms["mug"].transforms()) == 2
        assert len(syms["can"].transforms()) == 16

    def test_identity_always_first(self):
        transforms = SymmetrySet().transforms()
        assert len(transforms) == 1
        assert np.array_equal(transforms[0].rotation, np.eye(3))
