"""
Per-modality training augmentations.

Every function takes a seed (or a generator) and is a pure function of its
inputs, so the trainer can reproduce any augmented batch from its
iteration number alone.
"""

import math

import numpy as np
import torch
import torch.nn.functional as F

from .models import FaceFeatureSet, ImageView, Modality, PointCloud

__all__ = [
    "augment",
    "augment_image",
    "augment_mesh",
    "augment_points",
    "rotation_about_up",
]


def rotation_about_up(angle: float) -> np.ndarray:
    """
    Rotation matrix about the y (up) axis.

    :param angle: Angle in radians.
    :return: ``(3, 3)`` matrix acting on column vectors.
    """

    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _generator(seed: int | np.random.SeedSequence | np.random.Generator) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def augment_points(
    cloud: PointCloud,
    seed: int | np.random.SeedSequence | np.random.Generator = 0,
    jitter: float = 0.02,
    angle: float | None = None,
) -> PointCloud:
    """
    Rotate a cloud about the up axis, then jitter every point.

    :param cloud: Input cloud (unchanged).
    :param seed: Seed or generator.
    :param jitter: Standard deviation of the Gaussian jitter; 0 disables it.
    :param angle: Fixed rotation angle; drawn from ``[0, 2π)`` when None.
    :return: The augmented cloud.
    """

    rng = _generator(seed)
    if angle is None:
        angle = float(rng.uniform(0.0, 2.0 * math.pi))
    points = cloud.points @ rotation_about_up(angle).T
    if jitter > 0:
        points = points + rng.normal(0.0, jitter, size=points.shape)
    return PointCloud(points=points.astype(cloud.points.dtype, copy=False))


def augment_mesh(
    faces: FaceFeatureSet,
    seed: int | np.random.SeedSequence | np.random.Generator = 0,
    angle: float | None = None,
) -> FaceFeatureSet:
    """
    Rotate face centers, corner vectors and normals about the up axis.

    :param faces: Input descriptors (unchanged).
    :param seed: Seed or generator.
    :param angle: Fixed rotation angle; drawn from ``[0, 2π)`` when None.
    :return: Rotated descriptors sharing the neighbor index.
    """

    rng = _generator(seed)
    if angle is None:
        angle = float(rng.uniform(0.0, 2.0 * math.pi))
    rotation = rotation_about_up(angle).T
    dtype = faces.centers.dtype
    return FaceFeatureSet(
        centers=(faces.centers @ rotation).astype(dtype),
        corners=(faces.corners @ rotation).astype(dtype),
        normals=(faces.normals @ rotation).astype(dtype),
        neighbor_index=faces.neighbor_index,
    )


def augment_image(
    view: ImageView,
    seed: int | np.random.SeedSequence | np.random.Generator = 0,
    crop_scale: tuple[float, float] = (0.8, 1.0),
    flip_probability: float = 0.5,
) -> ImageView:
    """
    Random square crop resized back to the input resolution, then a random horizontal flip.

    :param view: Input view (unchanged).
    :param seed: Seed or generator.
    :param crop_scale: Range of the crop's area as a fraction of the image.
    :param flip_probability: Probability of mirroring left to right.
    :return: The augmented view, same resolution, values still in [0, 1].
    """

    rng = _generator(seed)
    height, width = view.resolution
    scale = float(rng.uniform(*crop_scale))
    crop_h = max(1, min(height, round(height * math.sqrt(scale))))
    crop_w = max(1, min(width, round(width * math.sqrt(scale))))
    top = int(rng.integers(0, height - crop_h + 1))
    left = int(rng.integers(0, width - crop_w + 1))
    flip = bool(rng.random() < flip_probability)

    pixels = np.asarray(view.pixels, dtype=np.float32)[top : top + crop_h, left : left + crop_w]
    if (crop_h, crop_w) != (height, width):
        tensor = torch.from_numpy(np.ascontiguousarray(pixels)).permute(2, 0, 1).unsqueeze(0)
        tensor = F.interpolate(tensor, size=(height, width), mode="bilinear", align_corners=False)
        pixels = tensor.squeeze(0).permute(1, 2, 0).numpy()
    if flip:
        pixels = pixels[:, ::-1]

    return ImageView(
        pixels=np.clip(np.ascontiguousarray(pixels), 0.0, 1.0),
        camera_position=view.camera_position,
        view_index=view.view_index,
    )


def augment(
    part: PointCloud | ImageView | FaceFeatureSet,
    modality: Modality | str,
    seed: int | np.random.SeedSequence | np.random.Generator = 0,
    **options,
) -> PointCloud | ImageView | FaceFeatureSet:
    """
    Apply the augmentation of one modality.

    :param part: The modality's data.
    :param modality: Which augmentation to run.
    :param seed: Seed or generator.
    :param options: Keyword options forwarded to the modality's function.
    :return: The augmented part.
    :raises ValueError: If the modality is unknown.
    :raises TypeError: If ``part`` doesn't match ``modality``.
    """

    modality = Modality(modality)
    expected = {
        Modality.POINT: (PointCloud, augment_points),
        Modality.IMAGE: (ImageView, augment_image),
        Modality.MESH: (FaceFeatureSet, augment_mesh),
    }
    part_type, function = expected[modality]
    if not isinstance(part, part_type):
        raise TypeError(f"{modality} augmentation expects {part_type.__name__}, got {type(part).__name__}")
    return function(part, seed=seed, **options)
