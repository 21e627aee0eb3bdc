import json

import numpy as np
import pytest
from pydantic import ValidationError

from trimodal.dataprep.archive import DatasetArchive, read_tensor
from trimodal.dataprep.builder import (
    PrepConfig,
    build_dataset,
    build_part_dataset,
    object_seed,
    prepare_object,
    write_toy_manifest,
)
from trimodal.dataprep.models import Split
from trimodal.dataprep.parser import parse_manifest_line
from trimodal.errors import DatasetBuildError


def write_manifest(path, records):
    path.write_text("".join(json.dumps(record) + "\n" for record in records))
    return path


class TestPrepConfig:
    def test_presets(self):
        assert PrepConfig.toy().views == 24
        assert PrepConfig.paper_scale().resolution == 224
        assert PrepConfig.toy(points=10).points == 10

    def test_workers_do_not_change_the_hash(self):
        assert PrepConfig(workers=4).content_hash() == PrepConfig().content_hash()
        assert PrepConfig(points=10).content_hash() != PrepConfig().content_hash()

    def test_needs_two_views(self):
        with pytest.raises(ValidationError):
            PrepConfig(views=1)


class TestToyManifest:
    def test_default_split(self, tmp_path):
        records = write_toy_manifest(tmp_path / "toy.jsonl")
        assert len(records) == 90
        assert sum(r["split"] == "train" for r in records) == 60
        assert sum(r["split"] == "test" for r in records) == 30
        assert len({r["id"] for r in records}) == 90
        assert {r["label"] for r in records} == {0, 1, 2}
        assert len((tmp_path / "toy.jsonl").read_text().splitlines()) == 90

    def test_unknown_family(self, tmp_path):
        with pytest.raises(ValueError):
            write_toy_manifest(tmp_path / "toy.jsonl", families=("box", "teapot"))


class TestPrepareObject:
    def test_shapes(self, tmp_path, tiny_prep_config):
        entry = parse_manifest_line('{"id": "s", "generator": {"family": "sphere", "seed": 1}, "label": 3}', tmp_path)
        sample = prepare_object(entry, tiny_prep_config)
        assert sample.point_cloud.points.shape == (64, 3)
        assert len(sample.mesh) == 32
        assert len(sample.views) == 3
        assert sample.class_label == 3

    def test_deterministic_per_object(self, tmp_path, tiny_prep_config):
        entry = parse_manifest_line('{"id": "s", "generator": {"family": "cone", "seed": 1}}', tmp_path)
        first = prepare_object(entry, tiny_prep_config)
        second = prepare_object(entry, tiny_prep_config)
        np.testing.assert_array_equal(first.point_cloud.points, second.point_cloud.points)
        np.testing.assert_array_equal(first.views[1].pixels, second.views[1].pixels)

    def test_seed_depends_on_id_not_position(self):
        assert object_seed(0, "a").entropy == object_seed(0, "a").entropy
        assert object_seed(0, "a").entropy != object_seed(0, "b").entropy

    def test_mesh_file(self, tmp_path, cube_off, tiny_prep_config):
        (tmp_path / "cube.off").write_text(cube_off)
        entry = parse_manifest_line('{"id": "cube", "path": "cube.off"}', tmp_path)
        sample = prepare_object(entry, tiny_prep_config)
        assert np.max(np.linalg.norm(sample.point_cloud.points, axis=1)) == pytest.approx(1.0, abs=1e-6)


class TestBuildDataset:
    def test_failures_are_skipped(self, tmp_path, tiny_prep_config):
        manifest = write_manifest(
            tmp_path / "m.jsonl",
            [
                {"id": "ok", "generator": {"family": "box", "seed": 0}, "label": 0},
                {"id": "missing", "path": "nowhere.off", "label": 0},
                {"id": "bad", "generator": {"family": "torus"}, "label": 1, "split": "test"},
            ],
        )
        seen = []
        summary = build_dataset(
            manifest, tmp_path / "out", config=tiny_prep_config, on_object=lambda i, ok: seen.append((i, ok))
        )
        assert summary.objects == 1
        assert [object_id for object_id, _ in summary.failures] == ["missing", "bad"]
        assert seen == [("ok", True), ("missing", False), ("bad", False)]
        assert summary.bytes_written > 0
        assert DatasetArchive.open(tmp_path / "out").ids() == ["ok"]

    def test_nothing_usable(self, tmp_path, tiny_prep_config):
        manifest = write_manifest(tmp_path / "m.jsonl", [{"id": "missing", "path": "nowhere.off"}])
        with pytest.raises(DatasetBuildError):
            build_dataset(manifest, tmp_path / "out", config=tiny_prep_config)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            build_dataset(tmp_path / "nope.jsonl", tmp_path / "out")

    def test_splits_are_recorded(self, tiny_archive):
        assert tiny_archive.ids(Split.TEST) == [
            f"{family}_{index:04d}" for family in ("box", "cylinder", "cone") for index in (4, 5)
        ]

    def test_worker_count_does_not_change_the_bytes(self, tmp_path, tiny_prep_config):
        manifest = tmp_path / "toy.jsonl"
        write_toy_manifest(manifest, families=("box", "cone"), train_per_family=2, test_per_family=0)
        build_dataset(manifest, tmp_path / "one", config=tiny_prep_config)
        build_dataset(manifest, tmp_path / "two", config=tiny_prep_config.model_copy(update={"workers": 2}))
        one, two = DatasetArchive.open(tmp_path / "one"), DatasetArchive.open(tmp_path / "two")
        assert one.config_hash == two.config_hash
        for a, b in zip(one.entries, two.entries, strict=True):
            assert a.object_id == b.object_id
            for name, blob in a.blobs.items():
                np.testing.assert_array_equal(read_tensor(one.root / blob), read_tensor(two.root / b.blobs[name]))


class TestPartDataset:
    def test_labels_follow_categories(self):
        grouped, parts = build_part_dataset(
            categories=("box", "cylinder"), train_per_category=3, test_per_category=2, points=128
        )
        assert len(grouped[Split.TRAIN]) == 6
        assert len(grouped[Split.TEST]) == 4
        for record in grouped[Split.TRAIN] + grouped[Split.TEST]:
            assert record.points.shape == (128, 3)
            assert set(record.labels.tolist()) <= set(parts[record.category])

    def test_every_part_is_sampled(self):
        grouped, _ = build_part_dataset(categories=("cylinder",), train_per_category=1, test_per_category=0)
        assert set(grouped[Split.TRAIN][0].labels.tolist()) == {2, 3, 4}
