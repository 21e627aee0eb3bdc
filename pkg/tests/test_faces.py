import logging

import numpy as np
import pytest

from trimodal.dataprep.faces import extract_face_features, face_adjacency
from trimodal.dataprep.models import MeshObject
from trimodal.dataprep.shapes import generate_shape


class TestFaceAdjacency:
    def test_tetrahedron(self, tetrahedron):
        # edge e runs from corner e to corner e + 1
        assert face_adjacency(tetrahedron.faces).tolist() == [[2, 3, 1], [0, 3, 2], [1, 3, 0], [0, 2, 1]]

    def test_boundary_edges_point_at_self(self):
        assert face_adjacency(np.array([[0, 1, 2]])).tolist() == [[0, 0, 0]]

    def test_non_manifold_edge_takes_lowest_index(self):
        faces = np.array([[0, 1, 2], [1, 0, 3], [0, 1, 4]])
        neighbors = face_adjacency(faces)
        assert neighbors[2, 0] == 0
        assert neighbors[0, 0] == 1

    def test_closed_shape_has_no_self_references(self):
        mesh = generate_shape({"family": "sphere", "seed": 0})
        neighbors = face_adjacency(mesh.faces)
        assert not np.any(neighbors == np.arange(len(mesh.faces))[:, None])


class TestExtractFaceFeatures:
    def test_exact_size(self, tetrahedron):
        features = extract_face_features(tetrahedron, target_faces=4)
        assert features.centers.shape == (4, 3)
        assert features.corners.shape == (4, 3, 3)
        assert features.normals.shape == (4, 3)
        assert features.neighbor_index.tolist() == face_adjacency(tetrahedron.faces).tolist()
        assert features.centers.dtype == np.float32

    def test_descriptors(self, tetrahedron):
        features = extract_face_features(tetrahedron, target_faces=4)
        np.testing.assert_allclose(features.centers, tetrahedron.triangles.mean(axis=1), atol=1e-6)
        np.testing.assert_allclose(features.corners.sum(axis=1), 0.0, atol=1e-6)
        np.testing.assert_allclose(np.linalg.norm(features.normals, axis=1), 1.0, atol=1e-6)
        np.testing.assert_allclose(features.normals[3], np.ones(3) / np.sqrt(3), atol=1e-6)

    def test_padding_repeats_whole_copies(self, tetrahedron):
        features = extract_face_features(tetrahedron, target_faces=10)
        neighbors = features.neighbor_index
        assert len(features) == 10
        assert neighbors.min() >= 0 and neighbors.max() < 10
        np.testing.assert_array_equal(neighbors[4:8], neighbors[:4] + 4)
        np.testing.assert_array_equal(features.centers[8:], features.centers[:2])

    def test_subsampling(self):
        mesh = generate_shape({"family": "cylinder", "seed": 0, "params": {"segments": 16, "rings": 4}})
        assert len(mesh.faces) == 160
        features = extract_face_features(mesh, target_faces=40, seed=1)
        assert len(features) == 40
        assert features.neighbor_index.min() >= 0
        assert features.neighbor_index.max() < 40

    def test_subsampling_is_seeded(self):
        mesh = generate_shape({"family": "cone", "seed": 4})
        first = extract_face_features(mesh, target_faces=16, seed=3)
        second = extract_face_features(mesh, target_faces=16, seed=3)
        np.testing.assert_array_equal(first.centers, second.centers)
        np.testing.assert_array_equal(first.neighbor_index, second.neighbor_index)

    def test_degenerate_faces_are_dropped(self, caplog):
        mesh = MeshObject(
            vertices=[[0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 1, 0]],
            faces=[[0, 1, 2], [0, 1, 3]],
            object_id="sliver",
        )
        with caplog.at_level(logging.WARNING):
            features = extract_face_features(mesh, target_faces=4)
        assert "sliver" in caplog.text
        np.testing.assert_allclose(features.centers, np.tile([1 / 3, 1 / 3, 0.0], (4, 1)), atol=1e-6)
        assert features.neighbor_index.tolist() == [[0, 0, 0], [1, 1, 1], [2, 2, 2], [3, 3, 3]]

    def test_all_degenerate(self):
        flat = MeshObject(vertices=[[0, 0, 0], [1, 0, 0], [2, 0, 0]], faces=[[0, 1, 2]])
        with pytest.raises(ValueError, match="degenerate"):
            extract_face_features(flat, target_faces=4)

    def test_empty_budget(self, tetrahedron):
        with pytest.raises(ValueError):
            extract_face_features(tetrahedron, target_faces=0)
