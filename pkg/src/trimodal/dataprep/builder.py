import json
import logging
import typing as t
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from pydantic import Field

from .archive import ArchiveWriter
from .faces import extract_face_features
from .models import SegmentationRecord, Split, TriModalSample
from .parser import ManifestEntry, load_mesh, parse_manifest
from .render import PhongShading, render_views
from .sampling import normalize_mesh, sample_point_cloud
from .shapes import FAMILIES, FAMILY_PARTS, generate_shape
from ..config import HashedConfig
from ..errors import DatasetBuildError

__all__ = [
    "BuildSummary",
    "PrepConfig",
    "build_dataset",
    "build_part_dataset",
    "object_seed",
    "prepare_object",
    "write_toy_manifest",
]

log = logging.getLogger(__name__)


class PrepConfig(HashedConfig):
    """
    Settings of a dataset build.
    """

    points: int = Field(default=2048, ge=1)
    oversample: int = Field(default=4, ge=1)
    faces: int = Field(default=1024, ge=1)
    views: int = Field(default=24, ge=2)
    resolution: int = Field(default=64, ge=1)
    camera_radius: float = Field(default=2.5, gt=1.0)
    seed: int = 0
    workers: int = Field(default=1, ge=1)

    @classmethod
    def toy(cls, **overrides) -> "PrepConfig":
        return cls(**{"points": 1024, "faces": 256, "views": 24, "resolution": 64, **overrides})

    @classmethod
    def paper_scale(cls, **overrides) -> "PrepConfig":
        return cls(**{"points": 2048, "faces": 1024, "views": 180, "resolution": 224, **overrides})

    def content_hash(self) -> str:
        """
        Hash of every field that changes the archive's bytes (``workers`` doesn't).
        """

        return self.model_copy(update={"workers": 1}).config_hash()


@dataclass
class BuildSummary:
    """
    Outcome of :func:`build_dataset`.

    Attributes:
        path: Archive directory.
        objects: Number of objects written.
        failures: ``(object_id, reason)`` for every skipped object.
        bytes_written: Total size of the tensor blobs.
    """

    path: Path
    objects: int
    failures: list[tuple[str, str]] = field(default_factory=list)
    bytes_written: int = 0


def object_seed(seed: int, object_id: str) -> np.random.SeedSequence:
    """
    Per-object seed, independent of build order and worker count.
    """

    return np.random.SeedSequence([seed, zlib.crc32(object_id.encode("utf-8"))])


def prepare_object(entry: ManifestEntry, config: PrepConfig) -> TriModalSample:
    """
    Turn one manifest entry into its three modalities.

    :param entry: Manifest entry (mesh file or generator spec).
    :param config: Build settings.
    :return: The sample, with ``config.views`` rendered views.
    :raises OSError: If the mesh file can't be read.
    :raises ValueError: If the mesh is malformed or degenerate.
    """

    if entry.path is not None:
        mesh = load_mesh(entry.path, object_id=entry.object_id, class_label=entry.label)
    else:
        mesh = generate_shape(entry.generator, object_id=entry.object_id, class_label=entry.label)
    mesh = normalize_mesh(mesh)

    point_seed, face_seed, view_seed = object_seed(config.seed, entry.object_id).spawn(3)
    cloud = sample_point_cloud(mesh, n=config.points, oversample=config.oversample, seed=point_seed)
    faces = extract_face_features(mesh, target_faces=config.faces, seed=face_seed)
    views = render_views(
        mesh,
        num_views=config.views,
        resolution=(config.resolution, config.resolution),
        seed=view_seed,
        shading=PhongShading(camera_radius=config.camera_radius),
    )
    return TriModalSample(
        mesh=faces,
        point_cloud=cloud,
        views=views,
        object_id=entry.object_id,
        class_label=entry.label,
    )


def _prepare_or_fail(
    entry: ManifestEntry, config: PrepConfig
) -> tuple[TriModalSample | None, str | None]:
    """
    Worker body: never raises, so one bad object can't stop the pool.
    """

    try:
        return prepare_object(entry, config), None
    except (OSError, ValueError) as error:
        return None, f"{type(error).__name__}: {error}"


def build_dataset(
    manifest: str | Path,
    out_dir: str | Path,
    config: PrepConfig | None = None,
    on_object: t.Callable[[str, bool], None] | None = None,
) -> BuildSummary:
    """
    Prepare every object of a manifest and write a dataset archive.

    Objects are processed in parallel when ``config.workers > 1``; results
    come back in manifest order and only this process writes to the archive.

    :param manifest: JSON-lines manifest of mesh paths or generator specs.
    :param out_dir: Archive directory.
    :param config: Build settings (defaults when None).
    :param on_object: Called with ``(object_id, succeeded)`` after every object.
    :return: A summary of the build.
    :raises FileNotFoundError: If the manifest doesn't exist.
    :raises ValueError: If the manifest is malformed.
    :raises DatasetBuildError: If no object could be prepared.
    """

    config = config or PrepConfig()
    entries = parse_manifest(manifest)
    log.info(f"building {len(entries)} object(s) from {manifest} with {config.workers} worker(s)")

    failures: list[tuple[str, str]] = []
    with ArchiveWriter(out_dir, config.model_dump(mode="json"), config.content_hash()) as writer:
        if config.workers > 1:
            executor = ProcessPoolExecutor(max_workers=config.workers)
            results = executor.map(_prepare_or_fail, entries, [config] * len(entries))
        else:
            executor = None
            results = (_prepare_or_fail(entry, config) for entry in entries)
        try:
            for entry, (sample, reason) in zip(entries, results):
                if sample is None:
                    log.warning(f"skipping {entry.object_id}: {reason}")
                    failures.append((entry.object_id, reason))
                else:
                    writer.add(sample, split=entry.split)
                if on_object is not None:
                    on_object(entry.object_id, sample is not None)
        finally:
            if executor is not None:
                executor.shutdown()

    if not writer.entries:
        raise DatasetBuildError(f"no object of {manifest} could be prepared ({len(failures)} failure(s))")
    return BuildSummary(
        path=Path(out_dir),
        objects=len(writer.entries),
        failures=failures,
        bytes_written=writer.bytes_written,
    )


def write_toy_manifest(
    path: str | Path,
    families: t.Sequence[str] = FAMILIES[:3],
    train_per_family: int = 20,
    test_per_family: int = 10,
    seed: int = 0,
) -> list[dict[str, t.Any]]:
    """
    Write the manifest of the bundled procedural dataset.

    Each family becomes one class (labelled by its position in ``families``)
    with ``train_per_family`` training and ``test_per_family`` test objects,
    each deformed by its own generator seed.

    :param path: Manifest file to write.
    :param families: Shape families to include.
    :param train_per_family: Training objects per family.
    :param test_per_family: Test objects per family.
    :param seed: Base seed of the generator seeds.
    :return: The written manifest records.
    :raises ValueError: On an unknown family.
    """

    records = []
    for label, family in enumerate(families):
        if family not in FAMILY_PARTS:
            raise ValueError(f"unknown shape family {family!r}")
        for index in range(train_per_family + test_per_family):
            records.append(
                {
                    "id": f"{family}_{index:04d}",
                    "generator": {"family": family, "seed": seed * 100_003 + label * 10_007 + index},
                    "label": label,
                    "split": str(Split.TRAIN if index < train_per_family else Split.TEST),
                }
            )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(json.dumps(record, sort_keys=True) + "\n" for record in records), encoding="utf-8")
    return records


def build_part_dataset(
    categories: t.Sequence[str] = FAMILIES[:3],
    train_per_category: int = 100,
    test_per_category: int = 20,
    points: int = 512,
    seed: int = 0,
) -> tuple[dict[Split, list[SegmentationRecord]], dict[str, list[int]]]:
    """
    Build the procedural part-segmentation dataset.

    Every point inherits the part id of the face it was sampled from.

    :param categories: Shape families to use as categories.
    :param train_per_category: Training shapes per category.
    :param test_per_category: Test shapes per category.
    :param points: Points per shape.
    :param seed: Base seed.
    :return: Records grouped by split, and each category's part ids.
    """

    grouped: dict[Split, list[SegmentationRecord]] = {Split.TRAIN: [], Split.TEST: []}
    for label, category in enumerate(categories):
        for index in range(train_per_category + test_per_category):
            object_id = f"{category}_part_{index:04d}"
            mesh = generate_shape(
                {"family": category, "seed": seed * 100_003 + label * 10_007 + index + 50_000},
                object_id=object_id,
            )
            mesh = normalize_mesh(mesh)
            cloud, face_index = sample_point_cloud(
                mesh, n=points, seed=object_seed(seed, object_id), return_faces=True
            )
            split = Split.TRAIN if index < train_per_category else Split.TEST
            grouped[split].append(
                SegmentationRecord(
                    points=cloud.points.astype(np.float32),
                    labels=mesh.face_parts[face_index],
                    category=category,
                    object_id=object_id,
                )
            )
    category_parts = {category: list(FAMILY_PARTS[category]) for category in categories}
    return grouped, category_parts
