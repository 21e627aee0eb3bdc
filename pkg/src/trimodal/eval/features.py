import json
import logging
import typing as t
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..dataprep.archive import DatasetArchive, read_tensor, write_tensor
from ..dataprep.models import Modality, Split
from ..encoders.mesh import MeshBatch
from ..encoders.network import TriModalNetwork

__all__ = ["Aggregate", "FeatureTable", "extract_feature_table", "select_views"]

log = logging.getLogger(__name__)

Aggregate = t.Literal["mean", "max"]


@dataclass
class FeatureTable:
    """
    One feature row per object, for a single modality.

    Attributes:
        object_ids: Row identifiers.
        labels: ``(n,)`` int64 classes (-1 where unlabelled).
        modality: Modality the features came from.
        features: ``(n, d)`` float32 features.
        view_count: Views aggregated per image row (1 otherwise).
        projected: Whether features are universal (projected) rather than backbone.
    """

    object_ids: list[str]
    labels: np.ndarray
    modality: Modality
    features: np.ndarray
    view_count: int = 1
    projected: bool = False
    aggregate: str = field(default="mean")

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        self.features = np.asarray(self.features, dtype=np.float32)
        self.modality = Modality(self.modality)
        if self.features.ndim != 2 or not len(self.object_ids) == len(self.labels) == len(self.features):
            raise ValueError("feature table needs one id, label and feature row per object")
        if not np.isfinite(self.features).all():
            raise ValueError("feature table contains non-finite values")

    def __len__(self) -> int:
        return len(self.object_ids)

    def subset(self, indices: t.Sequence[int] | np.ndarray) -> "FeatureTable":
        indices = np.asarray(indices, dtype=np.int64)
        return FeatureTable(
            object_ids=[self.object_ids[i] for i in indices],
            labels=self.labels[indices],
            modality=self.modality,
            features=self.features[indices],
            view_count=self.view_count,
            projected=self.projected,
            aggregate=self.aggregate,
        )

    def with_labels(self, labels: np.ndarray) -> "FeatureTable":
        return FeatureTable(
            object_ids=list(self.object_ids),
            labels=labels,
            modality=self.modality,
            features=self.features,
            view_count=self.view_count,
            projected=self.projected,
            aggregate=self.aggregate,
        )

    def save(self, directory: str | Path) -> Path:
        """
        Persist as ``features.bin`` + ``labels.bin`` tensor blobs and ``table.json``.
        """

        directory = Path(directory)
        write_tensor(directory / "features.bin", self.features)
        write_tensor(directory / "labels.bin", self.labels)
        meta = {
            "object_ids": self.object_ids,
            "modality": str(self.modality),
            "view_count": self.view_count,
            "projected": self.projected,
            "aggregate": self.aggregate,
        }
        (directory / "table.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
        return directory

    @classmethod
    def load(cls, directory: str | Path) -> "FeatureTable":
        directory = Path(directory)
        meta = json.loads((directory / "table.json").read_text(encoding="utf-8"))
        return cls(
            object_ids=meta["object_ids"],
            labels=read_tensor(directory / "labels.bin"),
            modality=meta["modality"],
            features=read_tensor(directory / "features.bin"),
            view_count=meta["view_count"],
            projected=meta["projected"],
            aggregate=meta["aggregate"],
        )


def select_views(object_id: str, available: int, views: int, seed: int) -> list[int]:
    """
    The ``views`` stored views of an object used for evaluation, fixed by seed and id.

    :raises ValueError: If ``views`` is below 1 or exceeds ``available``.
    """

    if views < 1:
        raise ValueError("at least one view is needed")
    if views > available:
        raise ValueError(f"{object_id} has {available} stored view(s), {views} requested")
    rng = np.random.default_rng([seed, zlib.crc32(object_id.encode("utf-8"))])
    return sorted(int(i) for i in rng.choice(available, size=views, replace=False))


@torch.no_grad()
def extract_feature_table(
    network: TriModalNetwork,
    archive: DatasetArchive,
    split: Split | str | None,
    modality: Modality | str,
    views: int = 1,
    aggregate: Aggregate = "mean",
    seed: int = 0,
    project: bool = False,
    batch_size: int = 16,
) -> FeatureTable:
    """
    Run one encoder over a split of an archive.

    Image rows aggregate the backbone features of ``views`` seeded views by
    mean or max; mesh and point rows are a single forward pass. With
    ``project`` the (aggregated) backbone features are passed through the
    modality's projection head.

    :param network: Trained networks (switched to eval mode).
    :param archive: Dataset archive.
    :param split: Split to extract, or None for every object.
    :param modality: Which encoder to run.
    :param views: Views per object for the image modality.
    :param aggregate: ``mean`` or ``max`` over views.
    :param seed: Seed of the view selection.
    :param project: Return universal instead of backbone features.
    :param batch_size: Objects per forward pass.
    :return: The feature table.
    :raises ValueError: If ``views`` exceeds an object's stored views or
        ``aggregate`` is unknown.
    """

    modality = Modality(modality)
    if aggregate not in ("mean", "max"):
        raise ValueError(f"unknown aggregate {aggregate!r}")
    network.eval()
    ids = archive.ids(split)
    if not ids:
        raise ValueError(f"no objects in split {split!r} of {archive.root}")

    rows = []
    for start in range(0, len(ids), batch_size):
        chunk = ids[start : start + batch_size]
        match modality:
            case Modality.MESH:
                inputs = MeshBatch.from_face_sets([archive.load_faces(i) for i in chunk])
                features = network.backbone(modality, inputs)
            case Modality.POINT:
                inputs = torch.from_numpy(np.stack([archive.load_points(i).points for i in chunk]).astype(np.float32))
                features = network.backbone(modality, inputs)
            case _:
                pixels = [
                    view.pixels
                    for object_id in chunk
                    for view in archive.load_views(
                        object_id, select_views(object_id, archive.entry(object_id).num_views, views, seed)
                    )
                ]
                per_view = network.backbone(modality, torch.from_numpy(np.stack(pixels)))
                per_view = per_view.reshape(len(chunk), views, -1)
                features = per_view.mean(dim=1) if aggregate == "mean" else per_view.max(dim=1).values
        if project:
            features = network.project(features, modality)
        rows.append(features.cpu().numpy())

    labels = [archive.entry(i).label for i in ids]
    log.debug(f"extracted {len(ids)} {modality} feature row(s) from {archive.root}")
    return FeatureTable(
        object_ids=ids,
        labels=np.array([-1 if label is None else label for label in labels]),
        modality=modality,
        features=np.concatenate(rows),
        view_count=views if modality == Modality.IMAGE else 1,
        projected=project,
        aggregate=aggregate,
    )
