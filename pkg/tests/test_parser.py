import json

import numpy as np
import pytest

from trimodal.dataprep.models import Split
from trimodal.dataprep.parser import load_mesh, parse_manifest, parse_manifest_line, parse_off
from trimodal.errors import OffParseError


class TestParseOff:
    def test_quads_are_fan_triangulated(self, cube_off):
        mesh = parse_off(cube_off, object_id="cube")
        assert mesh.vertices.shape == (8, 3)
        assert mesh.faces.shape == (12, 3)
        assert mesh.object_id == "cube"
        # the first quad 0 3 2 1 splits into (0, 3, 2) and (0, 2, 1)
        assert mesh.faces[:2].tolist() == [[0, 3, 2], [0, 2, 1]]

    def test_total_area_of_unit_cube(self, cube_off):
        assert parse_off(cube_off).face_areas.sum() == pytest.approx(6.0)

    def test_counts_glued_to_header(self):
        mesh = parse_off("OFF3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n")
        assert mesh.faces.tolist() == [[0, 1, 2]]

    def test_counts_on_header_line_after_space(self):
        mesh = parse_off("OFF 3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n")
        assert len(mesh.faces) == 1

    def test_comments_and_blank_lines_are_ignored(self):
        text = "# made by hand\nOFF\n\n3 1 0 # counts\n0 0 0\n\n1 0 0\n0 1 0 # last vertex\n3 0 1 2\n"
        mesh = parse_off(text, class_label=4)
        assert mesh.class_label == 4
        np.testing.assert_array_equal(mesh.vertices[1], [1.0, 0.0, 0.0])

    def test_triangles_repeating_a_vertex_are_dropped(self):
        text = "OFF\n4 2 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 1 2\n3 0 0 3\n"
        assert parse_off(text).faces.tolist() == [[0, 1, 2]]

    def test_missing_header(self):
        with pytest.raises(OffParseError) as error:
            parse_off("3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n")
        assert error.value.line_number == 1

    def test_truncated_vertices(self):
        with pytest.raises(OffParseError, match="expected 3 vertices"):
            parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n")

    def test_out_of_range_face_index_reports_line(self):
        with pytest.raises(OffParseError) as error:
            parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 5\n")
        assert error.value.line_number == 6

    def test_non_numeric_vertex(self):
        with pytest.raises(OffParseError, match="non-numeric"):
            parse_off("OFF\n3 1 0\n0 0 0\n1 x 0\n0 1 0\n3 0 1 2\n")

    def test_face_with_too_few_corners(self):
        with pytest.raises(OffParseError):
            parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n2 0 1\n")

    def test_trailing_data(self):
        with pytest.raises(OffParseError, match="trailing"):
            parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n3 0 1 2\n")

    def test_only_degenerate_faces(self):
        with pytest.raises(OffParseError, match="no usable faces"):
            parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 0 1\n")

    def test_empty_file(self):
        with pytest.raises(OffParseError, match="empty"):
            parse_off("")

    def test_parse_error_is_a_value_error(self):
        with pytest.raises(ValueError):
            parse_off("PLY\n")


class TestLoadMesh:
    def test_id_defaults_to_file_stem(self, tmp_path, cube_off):
        path = tmp_path / "chair_0001.off"
        path.write_text(cube_off)
        assert load_mesh(path).object_id == "chair_0001"

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_mesh(tmp_path / "nope.off")


class TestManifest:
    def test_path_entry_resolves_against_base_dir(self, tmp_path):
        entry = parse_manifest_line('{"id": "a", "path": "meshes/a.off", "label": 2}', tmp_path)
        assert entry.path == tmp_path / "meshes/a.off"
        assert entry.label == 2
        assert entry.split == Split.TRAIN
        assert entry.generator is None

    def test_generator_entry_with_split(self, tmp_path):
        line = json.dumps({"id": "c", "generator": {"family": "cone", "seed": 3}, "split": "test"})
        entry = parse_manifest_line(line, tmp_path)
        assert entry.split == Split.TEST
        assert entry.generator == {"family": "cone", "seed": 3}
        assert entry.label is None

    @pytest.mark.parametrize(
        "line",
        [
            "not json",
            "[1, 2]",
            '{"path": "a.off"}',
            '{"id": "a"}',
            '{"id": "a", "path": "a.off", "generator": {"family": "box"}}',
        ],
    )
    def test_malformed_lines(self, tmp_path, line):
        with pytest.raises(ValueError):
            parse_manifest_line(line, tmp_path, line_number=7)

    def test_duplicate_ids(self, tmp_path):
        manifest = tmp_path / "m.jsonl"
        manifest.write_text('{"id": "a", "path": "a.off"}\n{"id": "a", "path": "b.off"}\n')
        with pytest.raises(ValueError, match="a"):
            parse_manifest(manifest)

    def test_blank_lines_are_skipped(self, tmp_path):
        manifest = tmp_path / "m.jsonl"
        manifest.write_text('{"id": "a", "path": "a.off"}\n\n{"id": "b", "path": "b.off"}\n')
        assert [entry.object_id for entry in parse_manifest(manifest)] == ["a", "b"]
