import copy
import logging
import typing as t
import zlib
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from pydantic import Field

from ..config import HashedConfig
from ..dataprep.models import SegmentationRecord
from ..encoders.config import EncoderConfig
from ..encoders.network import TriModalNetwork
from ..encoders.point import PointEncoder

__all__ = [
    "SegmentationConfig",
    "SegmentationHead",
    "SegmentationMetrics",
    "SegmentationModel",
    "part_segmentation",
    "segmentation_metrics",
    "select_training_shapes",
]

log = logging.getLogger(__name__)

Mode = t.Literal["frozen", "unfrozen", "scratch"]


class SegmentationConfig(HashedConfig):
    """
    Settings of a part-segmentation transfer run.
    """

    fraction: float = Field(default=0.01, gt=0, le=1)
    mode: Mode = "frozen"
    iterations: int = Field(default=300, ge=1)
    batch_size: int = Field(default=8, ge=1)
    lr: float = Field(default=0.001, gt=0)
    hidden: tuple[int, int, int] = (256, 256, 128)
    seed: int = 0


@dataclass
class SegmentationMetrics:
    """
    Attributes:
        overall_accuracy: Fraction of all points labelled correctly.
        class_miou: Mean over part classes of the dataset-pooled IoU.
        instance_miou: Mean over shapes of the shape's mean part IoU.
    """

    overall_accuracy: float
    class_miou: float
    instance_miou: float

    def as_record(self) -> dict[str, float]:
        return {
            "overall_accuracy": self.overall_accuracy,
            "class_miou": self.class_miou,
            "instance_miou": self.instance_miou,
        }


def segmentation_metrics(
    predictions: t.Sequence[np.ndarray],
    truths: t.Sequence[np.ndarray],
    categories: t.Sequence[str],
    category_parts: dict[str, t.Sequence[int]],
) -> SegmentationMetrics:
    """
    Overall accuracy, class mIoU and instance mIoU of per-point part predictions.

    A part absent from both prediction and truth of a shape scores IoU 1 for
    that shape; for class mIoU, parts absent everywhere are left out.

    :param predictions: Predicted labels, one array per shape.
    :param truths: Ground-truth labels, aligned with ``predictions``.
    :param categories: Category of every shape.
    :param category_parts: Category to its part ids.
    :return: The three metrics, each in [0, 1].
    :raises ValueError: On misaligned inputs or a label outside its category's parts.
    """

    if not len(predictions) == len(truths) == len(categories) or not predictions:
        raise ValueError("need one prediction, truth and category per shape, and at least one shape")

    correct = total = 0
    intersections: dict[int, int] = {}
    unions: dict[int, int] = {}
    shape_ious = []
    for pred, truth, category in zip(predictions, truths, categories):
        pred, truth = np.asarray(pred), np.asarray(truth)
        if pred.shape != truth.shape:
            raise ValueError(f"prediction of shape {pred.shape} for truth of shape {truth.shape}")
        parts = list(category_parts[category])
        outside = np.setdiff1d(np.union1d(pred, truth), parts)
        if outside.size:
            raise ValueError(f"label(s) {outside.tolist()} outside the parts {parts} of {category!r}")

        correct += int((pred == truth).sum())
        total += truth.size
        ious = []
        for part in parts:
            intersection = int(((pred == part) & (truth == part)).sum())
            union = int(((pred == part) | (truth == part)).sum())
            intersections[part] = intersections.get(part, 0) + intersection
            unions[part] = unions.get(part, 0) + union
            ious.append(1.0 if union == 0 else intersection / union)
        shape_ious.append(float(np.mean(ious)))

    pooled = [intersections[part] / unions[part] for part in sorted(unions) if unions[part] > 0]
    return SegmentationMetrics(
        overall_accuracy=correct / total if total else 1.0,
        class_miou=float(np.mean(pooled)) if pooled else 1.0,
        instance_miou=float(np.mean(shape_ious)),
    )


class SegmentationHead(nn.Module):
    """
    Four per-point fully connected layers producing part logits.
    """

    def __init__(self, in_dim: int, num_parts: int, hidden: t.Sequence[int] = (256, 256, 128)):
        super().__init__()
        layers: list[nn.Module] = []
        for in_channels, out_channels in zip([in_dim, *hidden], hidden):
            layers += [nn.Conv1d(in_channels, out_channels, 1), nn.BatchNorm1d(out_channels), nn.ReLU()]
        layers.append(nn.Conv1d(hidden[-1], num_parts, 1))
        self.net = nn.Sequential(*layers)

    def forward(self, point_features: torch.Tensor) -> torch.Tensor:
        """
        :param point_features: ``(B, C, N)``.
        :return: ``(B, num_parts, N)`` logits.
        """

        return self.net(point_features)


class SegmentationModel(nn.Module):
    """
    A point encoder with a segmentation head on the concatenation of its
    four EdgeConv outputs and its global feature tiled over the points.
    """

    def __init__(self, encoder: PointEncoder, num_parts: int, hidden: t.Sequence[int] = (256, 256, 128)):
        super().__init__()
        self.encoder = encoder
        self.head = SegmentationHead(sum(encoder.layer_dims) + encoder.output_dim, num_parts, hidden)

    def forward(self, points: torch.Tensor) -> torch.Tensor:
        global_feature, layers = self.encoder.forward_with_layers(points)
        tiled = global_feature.unsqueeze(1).expand(-1, points.shape[1], -1)
        return self.head(torch.cat([*layers, tiled], dim=-1).transpose(1, 2))


def select_training_shapes(
    records: t.Sequence[SegmentationRecord], fraction: float, seed: int = 0
) -> list[SegmentationRecord]:
    """
    Keep ``floor(fraction * n)`` shapes of every category, chosen by seed.

    :raises ValueError: If a category keeps no shape.
    """

    by_category: dict[str, list[SegmentationRecord]] = {}
    for record in records:
        by_category.setdefault(record.category, []).append(record)

    selected = []
    for category, members in sorted(by_category.items()):
        count = int(fraction * len(members))
        if count == 0:
            raise ValueError(f"{fraction:.2%} of {len(members)} {category!r} shape(s) leaves no training shape")
        rng = np.random.default_rng([seed, zlib.crc32(category.encode("utf-8"))])
        keep = np.sort(rng.choice(len(members), size=count, replace=False))
        selected.extend(members[i] for i in keep)
    return selected


def _part_mask(categories: t.Sequence[str], category_parts: dict[str, t.Sequence[int]], num_parts: int) -> torch.Tensor:
    mask = torch.full((len(categories), num_parts, 1), float("-inf"))
    for row, category in enumerate(categories):
        mask[row, list(category_parts[category])] = 0.0
    return mask


def part_segmentation(
    network: TriModalNetwork | None,
    train: t.Sequence[SegmentationRecord],
    test: t.Sequence[SegmentationRecord],
    category_parts: dict[str, t.Sequence[int]],
    config: SegmentationConfig = SegmentationConfig(),
    encoder_config: EncoderConfig | None = None,
) -> tuple[SegmentationMetrics, int]:
    """
    Train a segmentation head on top of the point encoder and score it on ``test``.

    ``frozen`` keeps the pre-trained encoder fixed (eval-mode batch norm),
    ``unfrozen`` fine-tunes it, ``scratch`` trains a freshly initialized
    encoder of the same architecture. Logits are restricted to each shape's
    category parts for both training and prediction.

    :param network: Pre-trained networks (only needed for ``frozen``/``unfrozen``).
    :param train: Training records before subsampling.
    :param test: Test records.
    :param category_parts: Category to its part ids.
    :param config: Run settings.
    :param encoder_config: Architecture for ``scratch`` when ``network`` is None.
    :return: Test metrics and the number of training shapes used.
    :raises ValueError: If a pre-trained mode has no network, or subsampling
        leaves a category empty.
    """

    if config.mode != "scratch" and network is None:
        raise ValueError(f"{config.mode} mode needs a pre-trained network")
    shapes = select_training_shapes(train, config.fraction, config.seed)
    num_parts = max(max(parts) for parts in category_parts.values()) + 1

    torch.manual_seed(config.seed)
    if config.mode == "scratch":
        encoder = PointEncoder(encoder_config or network.config)
    else:
        encoder = copy.deepcopy(network.point_encoder)
    model = SegmentationModel(encoder, num_parts, config.hidden)

    frozen = config.mode == "frozen"
    if frozen:
        encoder.requires_grad_(False)
    optimizer = torch.optim.Adam([p for p in model.parameters() if p.requires_grad], lr=config.lr)

    for iteration in range(config.iterations):
        rng = np.random.default_rng([config.seed, iteration])
        picks = rng.choice(len(shapes), size=config.batch_size, replace=len(shapes) < config.batch_size)
        batch = [shapes[i] for i in picks]
        points = torch.from_numpy(np.stack([r.points for r in batch]).astype(np.float32))
        labels = torch.from_numpy(np.stack([r.labels for r in batch]))

        model.train()
        if frozen:
            encoder.eval()
        logits = model(points) + _part_mask([r.category for r in batch], category_parts, num_parts)
        loss = F.cross_entropy(logits, labels)
        optimizer.zero_grad(set_to_none=True)
        loss.backward()
        optimizer.step()

    model.eval()
    predictions = []
    with torch.no_grad():
        for start in range(0, len(test), config.batch_size):
            chunk = test[start : start + config.batch_size]
            points = torch.from_numpy(np.stack([r.points for r in chunk]).astype(np.float32))
            logits = model(points) + _part_mask([r.category for r in chunk], category_parts, num_parts)
            predictions.extend(logits.argmax(dim=1).numpy())

    metrics = segmentation_metrics(
        predictions, [r.labels for r in test], [r.category for r in test], category_parts
    )
    log.info(f"part segmentation ({config.mode}, {config.fraction:.0%}): {metrics.as_record()}")
    return metrics, len(shapes)
