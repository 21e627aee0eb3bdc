import itertools

import numpy as np
import pytest

from trimodal.dataprep.models import MeshObject
from trimodal.dataprep.sampling import (
    farthest_point_sample,
    normalize_mesh,
    normalize_unit_sphere,
    sample_point_cloud,
    sample_surface,
)
from trimodal.dataprep.shapes import generate_shape


def brute_force_fps(points: np.ndarray, n: int, start: int) -> list[int]:
    selected = [start]
    while len(selected) < n:
        best, best_distance = None, -1.0
        for candidate in range(len(points)):
            if candidate in selected:
                continue
            distance = min(float(np.sum((points[candidate] - points[s]) ** 2)) for s in selected)
            if distance > best_distance:
                best, best_distance = candidate, distance
        selected.append(best)
    return selected


class TestFarthestPointSample:
    def test_matches_brute_force_greedy(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            total = int(rng.integers(1, 11))
            points = rng.normal(size=(total, 3))
            n = int(rng.integers(1, total + 1))
            start = int(rng.integers(total))
            assert farthest_point_sample(points, n, start=start).tolist() == brute_force_fps(points, n, start)

    def test_line_picks_endpoints_first(self):
        points = np.array([[0.0, 0, 0], [1.0, 0, 0], [2.0, 0, 0], [3.0, 0, 0], [4.0, 0, 0]])
        assert farthest_point_sample(points, 3, start=0).tolist() == [0, 4, 2]

    def test_duplicates_are_never_selected_twice(self):
        points = np.zeros((4, 3))
        assert sorted(farthest_point_sample(points, 4).tolist()) == [0, 1, 2, 3]

    def test_selecting_all_points_is_a_permutation(self):
        points = np.random.default_rng(1).normal(size=(9, 3))
        assert sorted(farthest_point_sample(points, 9).tolist()) == list(range(9))

    def test_zero(self):
        assert farthest_point_sample(np.zeros((3, 3)), 0).shape == (0,)

    def test_too_many(self):
        with pytest.raises(ValueError):
            farthest_point_sample(np.zeros((3, 3)), 4)

    def test_bad_start(self):
        with pytest.raises(ValueError):
            farthest_point_sample(np.zeros((3, 3)), 2, start=3)

    def test_min_distance_is_non_increasing(self):
        points = np.random.default_rng(2).uniform(size=(60, 3))
        order = farthest_point_sample(points, 20)
        gaps = [
            min(np.linalg.norm(points[order[i]] - points[order[j]]) for j in range(i))
            for i in range(1, len(order))
        ]
        assert all(a >= b - 1e-12 for a, b in itertools.pairwise(gaps))


class TestSurface:
    def test_points_lie_on_faces(self, tetrahedron):
        points, faces = sample_surface(tetrahedron, 200, np.random.default_rng(0))
        assert points.shape == (200, 3)
        # three faces lie on the coordinate planes, the fourth on x + y + z = 1
        for point, face in zip(points, faces):
            if face == 3:
                assert point.sum() == pytest.approx(1.0)
            else:
                assert np.min(np.abs(point)) == pytest.approx(0.0, abs=1e-12)
            assert np.all(point >= -1e-12)

    def test_area_weighting(self):
        # areas 49.5 and 0.05
        mesh = MeshObject(
            vertices=[[0, 0, 0], [10, 0, 0], [0, 9.9, 0], [20, 0, 0], [21, 0, 0], [20, 0.1, 0]],
            faces=[[0, 1, 2], [3, 4, 5]],
        )
        _, faces = sample_surface(mesh, 20_000, np.random.default_rng(0))
        assert np.mean(faces == 0) > 0.98

    def test_zero_area(self):
        flat = MeshObject(vertices=[[0, 0, 0], [1, 0, 0], [2, 0, 0]], faces=[[0, 1, 2]])
        with pytest.raises(ValueError, match="zero surface area"):
            sample_surface(flat, 10, np.random.default_rng(0))


class TestNormalization:
    def test_unit_sphere(self):
        points = np.random.default_rng(3).normal(loc=5.0, scale=3.0, size=(100, 3))
        normalized = normalize_unit_sphere(points)
        np.testing.assert_allclose(normalized.mean(axis=0), 0.0, atol=1e-12)
        assert np.max(np.linalg.norm(normalized, axis=1)) == pytest.approx(1.0)

    def test_single_point(self):
        with pytest.raises(ValueError, match="zero extent"):
            normalize_unit_sphere(np.ones((4, 3)))

    def test_normalize_mesh(self, tetrahedron):
        mesh = normalize_mesh(tetrahedron)
        assert np.max(np.linalg.norm(mesh.vertices, axis=1)) == pytest.approx(1.0)
        centroid = (mesh.triangles.mean(axis=1) * mesh.face_areas[:, None]).sum(0) / mesh.face_areas.sum()
        np.testing.assert_allclose(centroid, 0.0, atol=1e-12)
        assert mesh.object_id == tetrahedron.object_id
        # the input is untouched
        assert tetrahedron.vertices.max() == 1.0


class TestSamplePointCloud:
    def test_shape_and_normalization(self, tetrahedron):
        cloud = sample_point_cloud(tetrahedron, n=128, seed=0)
        assert cloud.points.shape == (128, 3)
        np.testing.assert_allclose(cloud.points.mean(axis=0), 0.0, atol=1e-12)
        assert np.max(np.linalg.norm(cloud.points, axis=1)) == pytest.approx(1.0)

    def test_deterministic(self, tetrahedron):
        first = sample_point_cloud(tetrahedron, n=64, seed=5).points
        second = sample_point_cloud(tetrahedron, n=64, seed=5).points
        np.testing.assert_array_equal(first, second)
        assert not np.array_equal(first, sample_point_cloud(tetrahedron, n=64, seed=6).points)

    def test_generated_shapes_are_normalized(self):
        for family in ("box", "cylinder", "cone", "sphere"):
            mesh = generate_shape({"family": family, "seed": 1})
            cloud = sample_point_cloud(mesh, n=256, seed=1)
            np.testing.assert_allclose(cloud.points.mean(axis=0), 0.0, atol=1e-9)
            assert np.max(np.linalg.norm(cloud.points, axis=1)) == pytest.approx(1.0)

    def test_return_faces(self):
        mesh = generate_shape({"family": "cylinder", "seed": 2})
        cloud, faces = sample_point_cloud(mesh, n=100, seed=0, return_faces=True)
        assert faces.shape == (100,)
        assert set(mesh.face_parts[faces].tolist()) <= {2, 3, 4}

    def test_bad_oversample(self, tetrahedron):
        with pytest.raises(ValueError):
            sample_point_cloud(tetrahedron, n=8, oversample=0)
