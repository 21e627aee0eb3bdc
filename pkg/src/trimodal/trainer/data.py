"""
Iteration-indexed training batches.

The batch of iteration ``t`` is a pure function of the seed, ``t`` and the
archive: epoch ``t // batches_per_epoch`` fixes a permutation of the
training objects, ``t % batches_per_epoch`` fixes the slice of it, and each
slot draws its two views and augmentations from ``(seed, t, slot)``. Worker
processes can therefore build batches ahead of time in any order and a
resumed run sees exactly the batches the original run would have seen.
"""

import typing as t

import numpy as np
import torch
from torch.utils.data import DataLoader, Dataset

from .config import TrainConfig
from ..dataprep.archive import DatasetArchive
from ..dataprep.augment import augment_image, augment_mesh, augment_points
from ..dataprep.models import Split
from ..encoders.mesh import MeshBatch

__all__ = ["BatchSource", "batch_loader", "mesh_batch"]


class BatchSource(Dataset):
    """
    Map-style dataset whose item ``t`` is the whole batch of iteration ``t``.

    :param archive: Dataset archive.
    :param config: Run settings.
    :raises ValueError: If the training split can't fill one batch or an
        object has fewer than two stored views.
    """

    def __init__(self, archive: DatasetArchive, config: TrainConfig):
        self.archive = archive
        self.config = config
        self.object_ids = archive.ids(Split.TRAIN)
        if len(self.object_ids) < config.batch_size:
            raise ValueError(
                f"{len(self.object_ids)} training object(s) can't fill a batch of {config.batch_size}"
            )
        if archive.min_views < config.views_per_sample:
            raise ValueError(f"objects need at least {config.views_per_sample} stored views, found {archive.min_views}")
        self.batches_per_epoch = len(self.object_ids) // config.batch_size

    def __len__(self) -> int:
        return self.config.iterations

    def batch_ids(self, iteration: int) -> list[str]:
        """
        Object ids of iteration ``iteration``, without loading anything.
        """

        epoch, position = divmod(iteration, self.batches_per_epoch)
        order = np.random.default_rng([self.config.seed, epoch]).permutation(len(self.object_ids))
        size = self.config.batch_size
        return [self.object_ids[i] for i in order[position * size : (position + 1) * size]]

    def __getitem__(self, iteration: int) -> dict[str, t.Any]:
        config = self.config
        ids = self.batch_ids(iteration)
        centers, corners, normals, neighbors, points, first, second = [], [], [], [], [], [], []
        for slot, object_id in enumerate(ids):
            rng = np.random.default_rng([config.seed, iteration, slot])
            pair = rng.choice(self.archive.entry(object_id).num_views, size=2, replace=False)
            if config.random_view_assignment and rng.random() < 0.5:
                pair = pair[::-1]

            faces = augment_mesh(self.archive.load_faces(object_id), seed=rng)
            cloud = augment_points(self.archive.load_points(object_id), seed=rng, jitter=config.jitter)
            views = [
                augment_image(
                    self.archive.load_view(object_id, int(index)),
                    seed=rng,
                    crop_scale=config.crop_scale,
                    flip_probability=config.flip_probability,
                )
                for index in pair
            ]

            centers.append(faces.centers)
            corners.append(faces.corners)
            normals.append(faces.normals)
            neighbors.append(faces.neighbor_index)
            points.append(cloud.points)
            first.append(views[0].pixels)
            second.append(views[1].pixels)

        def stack(arrays, dtype=np.float32):
            return torch.from_numpy(np.stack(arrays).astype(dtype, copy=False))

        return {
            "iteration": iteration,
            "object_ids": ids,
            "centers": stack(centers),
            "corners": stack(corners),
            "normals": stack(normals),
            "neighbors": stack(neighbors, np.int64),
            "points": stack(points),
            "first_views": stack(first),
            "second_views": stack(second),
        }


def mesh_batch(batch: dict[str, t.Any]) -> MeshBatch:
    return MeshBatch(
        centers=batch["centers"],
        corners=batch["corners"],
        normals=batch["normals"],
        neighbors=batch["neighbors"],
    )


def batch_loader(source: BatchSource, start: int, workers: int = 0) -> DataLoader:
    """
    Ordered loader over iterations ``start .. iterations - 1``.

    :param source: The batch source.
    :param start: First iteration to produce.
    :param workers: Prefetch worker processes (0 loads in the calling process).
    :return: A loader yielding one batch dict per iteration, in order.
    """

    return DataLoader(
        source,
        batch_size=None,
        sampler=range(start, len(source)),
        num_workers=workers,
        prefetch_factor=2 if workers > 0 else None,
    )
