import numpy as np
import pytest

from trimodal.dataprep.models import ImageView, MeshObject, Modality, PointCloud, SegmentationRecord, Split


class TestModality:
    def test_values(self):
        assert [str(m) for m in Modality] == ["mesh", "point", "image"]

    def test_unknown_value(self):
        with pytest.raises(ValueError):
            Modality("voxel")


class TestSplit:
    def test_values(self):
        assert Split("train") is Split.TRAIN
        assert Split("test") is Split.TEST


class TestMeshObject:
    def test_arrays_are_coerced(self):
        mesh = MeshObject(vertices=[[0, 0, 0], [1, 0, 0], [0, 1, 0]], faces=[[0, 1, 2]])
        assert mesh.vertices.dtype == np.float64
        assert mesh.faces.dtype == np.int64

    def test_triangles_and_areas(self, tetrahedron):
        assert tetrahedron.triangles.shape == (4, 3, 3)
        areas = tetrahedron.face_areas
        assert areas[:3] == pytest.approx([0.5, 0.5, 0.5])
        assert areas[3] == pytest.approx(np.sqrt(3) / 2)

    def test_no_faces(self):
        with pytest.raises(ValueError, match="no faces"):
            MeshObject(vertices=np.zeros((3, 3)), faces=np.zeros((0, 3)))

    def test_index_out_of_range(self):
        with pytest.raises(ValueError, match="outside"):
            MeshObject(vertices=np.zeros((3, 3)), faces=[[0, 1, 3]])

    def test_repeated_vertex(self):
        with pytest.raises(ValueError, match="repeated"):
            MeshObject(vertices=np.eye(3), faces=[[0, 1, 1]])

    def test_face_parts_length(self):
        with pytest.raises(ValueError, match="face_parts"):
            MeshObject(vertices=np.eye(3), faces=[[0, 1, 2]], face_parts=[0, 1])


class TestRecords:
    def test_point_cloud_len(self):
        assert len(PointCloud(points=np.zeros((5, 3)))) == 5

    def test_image_resolution(self):
        view = ImageView(pixels=np.zeros((12, 16, 3), dtype=np.float32), camera_position=np.ones(3))
        assert view.resolution == (12, 16)

    def test_segmentation_labels_are_int64(self):
        record = SegmentationRecord(points=np.zeros((4, 3)), labels=[1, 1, 2, 2], category="cylinder")
        assert record.labels.dtype == np.int64
