import math

import numpy as np
import pytest

from trimodal.dataprep.augment import augment, augment_image, augment_mesh, augment_points, rotation_about_up
from trimodal.dataprep.faces import extract_face_features
from trimodal.dataprep.models import ImageView, PointCloud


@pytest.fixture
def cloud() -> PointCloud:
    return PointCloud(points=np.random.default_rng(0).normal(size=(50, 3)).astype(np.float32))


@pytest.fixture
def view() -> ImageView:
    pixels = np.random.default_rng(1).uniform(size=(16, 16, 3)).astype(np.float32)
    return ImageView(pixels=pixels, camera_position=np.array([0.0, 0.0, 2.5]), view_index=2)


class TestRotation:
    def test_quarter_turn(self):
        np.testing.assert_allclose(rotation_about_up(math.pi / 2) @ [1.0, 0.0, 0.0], [0.0, 0.0, -1.0], atol=1e-12)

    def test_proper_rotation(self):
        rotation = rotation_about_up(1.234)
        np.testing.assert_allclose(rotation @ rotation.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(rotation) == pytest.approx(1.0)


class TestAugmentPoints:
    def test_rotation_keeps_heights_and_norms(self, cloud):
        rotated = augment_points(cloud, seed=0, jitter=0.0)
        np.testing.assert_allclose(rotated.points[:, 1], cloud.points[:, 1], atol=1e-6)
        np.testing.assert_allclose(
            np.linalg.norm(rotated.points, axis=1), np.linalg.norm(cloud.points, axis=1), atol=1e-5
        )
        assert rotated.points.dtype == np.float32

    def test_fixed_angle(self, cloud):
        rotated = augment_points(cloud, jitter=0.0, angle=0.7)
        np.testing.assert_allclose(rotated.points, cloud.points @ rotation_about_up(0.7).T, atol=1e-5)

    def test_jitter_is_small(self, cloud):
        jittered = augment_points(cloud, seed=0, jitter=0.01, angle=0.0)
        assert np.abs(jittered.points - cloud.points).max() < 0.1
        assert not np.array_equal(jittered.points, cloud.points)

    def test_seeded(self, cloud):
        np.testing.assert_array_equal(augment_points(cloud, seed=9).points, augment_points(cloud, seed=9).points)

    def test_input_untouched(self, cloud):
        before = cloud.points.copy()
        augment_points(cloud, seed=1)
        np.testing.assert_array_equal(cloud.points, before)


class TestAugmentMesh:
    def test_rotates_every_descriptor(self, tetrahedron):
        faces = extract_face_features(tetrahedron, target_faces=4)
        rotated = augment_mesh(faces, angle=math.pi)
        np.testing.assert_allclose(rotated.centers[:, [0, 2]], -faces.centers[:, [0, 2]], atol=1e-6)
        np.testing.assert_allclose(rotated.corners[..., 1], faces.corners[..., 1], atol=1e-6)
        np.testing.assert_allclose(np.linalg.norm(rotated.normals, axis=1), 1.0, atol=1e-6)
        np.testing.assert_array_equal(rotated.neighbor_index, faces.neighbor_index)


class TestAugmentImage:
    def test_full_crop_without_flip_is_identity(self, view):
        out = augment_image(view, crop_scale=(1.0, 1.0), flip_probability=0.0)
        np.testing.assert_array_equal(out.pixels, view.pixels)
        assert out.view_index == 2

    def test_flip(self, view):
        out = augment_image(view, crop_scale=(1.0, 1.0), flip_probability=1.0)
        np.testing.assert_array_equal(out.pixels, view.pixels[:, ::-1])

    def test_crop_keeps_resolution_and_range(self, view):
        out = augment_image(view, seed=3, crop_scale=(0.25, 0.25))
        assert out.resolution == (16, 16)
        assert out.pixels.min() >= 0.0
        assert out.pixels.max() <= 1.0
        assert not np.allclose(out.pixels, view.pixels)


class TestAugmentDispatch:
    def test_routes_by_modality(self, cloud):
        out = augment(cloud, "point", seed=0, jitter=0.0, angle=0.0)
        np.testing.assert_allclose(out.points, cloud.points, atol=1e-6)

    def test_wrong_part(self, cloud):
        with pytest.raises(TypeError):
            augment(cloud, "image")

    def test_unknown_modality(self, cloud):
        with pytest.raises(ValueError):
            augment(cloud, "voxel")
