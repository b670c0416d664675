"""Convex distance kernel: analytic box-box oracles, brute-force
feature-pair oracle, EPA penetration, and the documented axis convention."""

import numpy as np
import pytest

from conftest import box_part, icosphere_part, pose_xyz
from scenerefine.collision import (
    convex_hull,
    epa_penetration,
    gjk_distance,
    signed_distance,
    spheres_within_margin,
)
from scenerefine.errors import DegenerateInput
from scenerefine.se3 import Pose, exp_so3

UNIT_CUBE = box_part((1.0, 1.0, 1.0))
IDENT = pose_xyz()


def brute_force_distance(verts_a, verts_b):
    """Exhaustive min distance over all triangle pairs of two convex hulls
    (valid for separated hulls)."""
    from scipy.spatial import ConvexHull

    def tri_points(verts):
        hull = ConvexHull(verts)
        tris = verts[hull.simplices]
        # dense barycentric sampling of every face triangle
        n = 40
        us = np.linspace(0, 1, n)
        pts = []
        for t in tris:
            for u in us:
                for v in np.linspace(0, 1 - u, max(int((1 - u) * n), 1)):
                    pts.append(t[0] + u * (t[1] - t[0]) + v * (t[2] - t[0]))
        return np.array(pts)

    pa = tri_points(np.asarray(verts_a))
    pb = tri_points(np.asarray(verts_b))
    d2 = ((pa[:, None, :] - pb[None, :, :]) ** 2).sum(axis=2)
    return np.sqrt(d2.min())


class TestConvexHull:
    def test_cube_with_center_removed(self, rng):
        pts = np.vstack([UNIT_CUBE.vertices, np.zeros(3)])
        part = convex_hull(pts)
        assert part.vertices.shape[0] == 8

    def test_containment(self, rng):
        pts = rng.normal(size=(100, 3))
        pts /= np.maximum(np.linalg.norm(pts, axis=1, keepdims=True), 1.0)
        part = convex_hull(pts)
        # all inputs satisfy every face half-space within 1e-9
        slack = pts @ part.normals.T - part.offsets
        assert slack.max() <= 1e-9

    def test_coplanar_rejected(self):
        pts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], dtype=float)
        with pytest.raises(DegenerateInput):
            convex_hull(pts)

    def test_too_few_points(self):
        with pytest.raises(DegenerateInput):
            convex_hull(np.zeros((3, 3)))


class TestGjkDistance:
    def test_separated_cubes(self):
        res = gjk_distance(UNIT_CUBE, IDENT, UNIT_CUBE, pose_xyz(3.0))
        assert abs(res.signed_distance - 2.0) <= 1e-6
        assert np.allclose(res.axis, [1, 0, 0], atol=1e-9)
        assert (
            abs(np.linalg.norm(res.witness_a - res.witness_b) - res.signed_distance) <= 1e-6
        )

    def test_touching_cubes(self):
        res = signed_distance(UNIT_CUBE, IDENT, UNIT_CUBE, pose_xyz(1.0))
        assert abs(res.signed_distance) <= 1e-6

    def test_tetrahedra_vs_brute_force(self, rng):
        tet = convex_hull(
            np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float)
        )
        for _ in range(5):
            offset = rng.normal(size=3)
            offset *= (2.5 + rng.uniform(0, 1)) / np.linalg.norm(offset)
            pose_b = Pose(exp_so3(rng.uniform(-1, 1, 3)), offset)
            res = gjk_distance(tet, IDENT, tet, pose_b)
            wb = tet.vertices @ pose_b.rotation.T + pose_b.translation
            expected = brute_force_distance(tet.vertices, wb)
            assert abs(res.signed_distance - expected) <= 2e-3  # sampling-limited oracle
            # vertex-pair lower bound is exact for the hull distance
            lb = np.sqrt((((tet.vertices[:, None] - wb[None]) ** 2).sum(-1)).min())
            assert res.signed_distance <= lb + 1e-9


class TestEpaPenetration:
    def test_coincident_cubes(self):
        res = epa_penetration(UNIT_CUBE, IDENT, UNIT_CUBE, IDENT)
        assert abs(res.signed_distance + 1.0) <= 1e-4

    def test_offset_cubes(self):
        res = epa_penetration(UNIT_CUBE, IDENT, UNIT_CUBE, pose_xyz(0.8))
        assert abs(res.signed_distance + 0.2) <= 1e-5

    def test_translation_resolves_contact(self, rng):
        for _ in range(10):
            pose_b = Pose(
                exp_so3(rng.uniform(-0.3, 0.3, 3)), rng.uniform(-0.4, 0.4, 3)
            )
            res = signed_distance(UNIT_CUBE, IDENT, UNIT_CUBE, pose_b)
            if res.signed_distance >= 0:
                continue
            moved = Pose(
                pose_b.rotation, pose_b.translation - res.signed_distance * res.axis
            )
            out = signed_distance(UNIT_CUBE, IDENT, UNIT_CUBE, moved)
            assert abs(out.signed_distance) <= 1e-4

    def test_requires_overlap(self):
        with pytest.raises(DegenerateInput):
            epa_penetration(UNIT_CUBE, IDENT, UNIT_CUBE, pose_xyz(3.0))


class TestSignedDistanceProperties:
    def test_symmetry(self, rng):
        for _ in range(20):
            pose_b = Pose(exp_so3(rng.uniform(-1, 1, 3)), rng.uniform(-2, 2, 3))
            d_ab = signed_distance(UNIT_CUBE, IDENT, UNIT_CUBE, pose_b).signed_distance
            d_ba = signed_distance(UNIT_CUBE, pose_b, UNIT_CUBE, IDENT).signed_distance
            assert abs(d_ab - d_ba) <= 1e-9

    def test_rigid_invariance(self, rng):
        for _ in range(20):
            pose_b = Pose(exp_so3(rng.uniform(-1, 1, 3)), rng.uniform(-2, 2, 3))
            d0 = signed_distance(UNIT_CUBE, IDENT, UNIT_CUBE, pose_b).signed_distance
            g = Pose(exp_so3(rng.uniform(-1, 1, 3)), rng.uniform(-2, 2, 3))
            from scenerefine.se3 import pose_compose

            d1 = signed_distance(
                UNIT_CUBE, pose_compose(g, IDENT), UNIT_CUBE, pose_compose(g, pose_b)
            ).signed_distance
            assert abs(d0 - d1) <= 1e-7

    def test_sphere_sphere_analytic(self):
        sph = icosphere_part(radius=0.05)
        res = signed_distance(sph, IDENT, sph, pose_xyz(0.3))
        # icosphere radius slightly under 0.05; vertices exactly at 0.05
        assert abs(res.signed_distance - 0.2) <= 1e-3

    def test_degenerate_thin_rotation(self):
        # near-degenerate face-face contact that once cycled forever
        table = box_part((1.0, 1.0, 0.1))
        small = box_part((0.05, 0.05, 0.05))
        for ang in (1e-9, 1e-8, 1e-7):
            pose = Pose(exp_so3([ang, 0, 0]), np.array([0.0, 0.0, 0.075 - 0.02]))
            res = signed_distance(small, pose, table, IDENT)
            assert abs(res.signed_distance + 0.02) <= 1e-4


class TestBroadPhase:
    def test_never_culls_close_pairs(self, rng):
        for _ in range(200):
            pose_b = Pose(exp_so3(rng.uniform(-1, 1, 3)), rng.uniform(-3, 3, 3))
            if spheres_within_margin(UNIT_CUBE, IDENT, UNIT_CUBE, pose_b, 0.05):
                continue
            d = signed_distance(UNIT_CUBE, IDENT, UNIT_CUBE, pose_b).signed_distance
            assert d >= 0.05
