"""
MeshNet-style mesh encoder.

Faces are the unit of computation: a spatial descriptor on face centers, a
structural descriptor from corner vectors (face-rotate convolution) and
normals (face kernel correlation), then mesh convolution blocks that mix
each face with its three edge neighbors, a per-face fusion layer and a
global max pool. All per-face layers are 1x1 convolutions, so the encoder
is indifferent to face order as long as ``neighbors`` is remapped with it.
"""

import math
import typing as t
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from .config import EncoderConfig
from ..dataprep.models import FaceFeatureSet

__all__ = [
    "FaceKernelCorrelation",
    "FaceRotateConvolution",
    "MeshBatch",
    "MeshConvolution",
    "MeshEncoder",
    "SpatialDescriptor",
]


@dataclass
class MeshBatch:
    """
    A batch of face descriptor sets as tensors.

    Attributes:
        centers: ``(B, F, 3)``.
        corners: ``(B, F, 3, 3)``.
        normals: ``(B, F, 3)``.
        neighbors: ``(B, F, 3)`` int64.
    """

    centers: torch.Tensor
    corners: torch.Tensor
    normals: torch.Tensor
    neighbors: torch.Tensor

    @classmethod
    def from_face_sets(cls, face_sets: t.Sequence[FaceFeatureSet], dtype: torch.dtype = torch.float32) -> "MeshBatch":
        return cls(
            centers=torch.from_numpy(np.stack([f.centers for f in face_sets])).to(dtype),
            corners=torch.from_numpy(np.stack([f.corners for f in face_sets])).to(dtype),
            normals=torch.from_numpy(np.stack([f.normals for f in face_sets])).to(dtype),
            neighbors=torch.from_numpy(np.stack([f.neighbor_index for f in face_sets])).long(),
        )

    def to(self, *args, **kwargs) -> "MeshBatch":
        """
        Move or cast the float fields; ``neighbors`` keeps its integer dtype.
        """

        centers = self.centers.to(*args, **kwargs)
        return MeshBatch(
            centers=centers,
            corners=self.corners.to(*args, **kwargs),
            normals=self.normals.to(*args, **kwargs),
            neighbors=self.neighbors.to(device=centers.device),
        )

    def __len__(self) -> int:
        return self.centers.shape[0]


def _mlp(channels: t.Sequence[int]) -> nn.Sequential:
    layers: list[nn.Module] = []
    for in_channels, out_channels in zip(channels, channels[1:]):
        layers += [nn.Conv1d(in_channels, out_channels, 1), nn.BatchNorm1d(out_channels), nn.ReLU()]
    return nn.Sequential(*layers)


class SpatialDescriptor(nn.Module):
    def __init__(self, channels: t.Sequence[int]):
        super().__init__()
        self.mlp = _mlp([3, *channels])

    def forward(self, centers: torch.Tensor) -> torch.Tensor:
        return self.mlp(centers.transpose(1, 2))


class FaceRotateConvolution(nn.Module):
    """
    Shared layers over the three cyclic corner-vector pairs, averaged, then fused.

    Averaging over ``(c0, c1), (c1, c2), (c2, c0)`` makes the output
    independent of which corner is listed first.
    """

    def __init__(self, rotate: t.Sequence[int], fusion: t.Sequence[int]):
        super().__init__()
        self.rotate_mlp = _mlp([6, *rotate])
        self.fusion_mlp = _mlp([rotate[-1], *fusion])

    def forward(self, corners: torch.Tensor) -> torch.Tensor:
        c = corners.permute(2, 0, 3, 1)  # (3 corners, B, xyz, F)
        pairs = [torch.cat([c[i], c[(i + 1) % 3]], dim=1) for i in range(3)]
        rotated = sum(self.rotate_mlp(pair) for pair in pairs) / 3.0
        return self.fusion_mlp(rotated)


class FaceKernelCorrelation(nn.Module):
    """
    Correlation of each face's normals with learnable unit-vector kernels.

    Every kernel is ``kernel_size`` points on the unit sphere, parameterized
    by polar and azimuthal angles. The score of a face is the mean Gaussian
    similarity between its own and its neighbors' normals and the kernel
    points.
    """

    def __init__(self, num_kernels: int, kernel_size: int = 4, sigma: float = 0.2):
        super().__init__()
        self.sigma = sigma
        self.alpha = nn.Parameter(torch.rand(num_kernels, kernel_size) * math.pi)
        self.beta = nn.Parameter(torch.rand(num_kernels, kernel_size) * 2.0 * math.pi)
        self.bn = nn.BatchNorm1d(num_kernels)
        self.relu = nn.ReLU()

    def kernel_points(self) -> torch.Tensor:
        """
        ``(K, M, 3)`` unit vectors of every kernel.
        """

        return torch.stack(
            [
                torch.sin(self.alpha) * torch.cos(self.beta),
                torch.sin(self.alpha) * torch.sin(self.beta),
                torch.cos(self.alpha),
            ],
            dim=-1,
        )

    def forward(self, normals: torch.Tensor, neighbors: torch.Tensor) -> torch.Tensor:
        batch, faces, _ = normals.shape
        gathered = torch.gather(
            normals, 1, neighbors.reshape(batch, faces * 3, 1).expand(batch, faces * 3, 3)
        ).reshape(batch, faces, 3, 3)
        ring = torch.cat([normals.unsqueeze(2), gathered], dim=2)  # (B, F, 4, 3)
        kernels = self.kernel_points()
        squared = (
            ring.pow(2).sum(-1)[..., None, None]
            + kernels.pow(2).sum(-1)[None, None, None]
            - 2.0 * torch.einsum("bfnc,kmc->bfnkm", ring, kernels)
        )
        similarity = torch.exp(-squared.clamp_min(0.0) / (2.0 * self.sigma**2)).mean(dim=(2, 4))
        return self.relu(self.bn(similarity.transpose(1, 2)))


class MeshConvolution(nn.Module):
    """
    One mesh convolution block.

    The spatial path combines spatial and structural features per face. The
    structural path concatenates each face with each neighbor, applies a
    shared layer, max-pools over the three neighbors and aggregates.
    """

    def __init__(self, spatial_in: int, structural_in: int, spatial_out: int, structural_out: int):
        super().__init__()
        self.combination_mlp = _mlp([spatial_in + structural_in, spatial_out])
        self.concat_mlp = nn.Sequential(
            nn.Conv2d(2 * structural_in, structural_in, 1),
            nn.BatchNorm2d(structural_in),
            nn.ReLU(),
        )
        self.aggregation_mlp = _mlp([structural_in, structural_out])

    def forward(
        self, spatial: torch.Tensor, structural: torch.Tensor, neighbors: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        spatial_out = self.combination_mlp(torch.cat([spatial, structural], dim=1))

        batch, channels, faces = structural.shape
        index = neighbors.reshape(batch, 1, faces * 3).expand(batch, channels, faces * 3)
        around = torch.gather(structural, 2, index).reshape(batch, channels, faces, 3)
        own = structural.unsqueeze(-1).expand(batch, channels, faces, 3)
        aggregated = self.concat_mlp(torch.cat([own, around], dim=1)).max(dim=-1).values
        return spatial_out, self.aggregation_mlp(aggregated)


class MeshEncoder(nn.Module):
    def __init__(self, config: EncoderConfig):
        super().__init__()
        s = config.scaled
        self.spatial = SpatialDescriptor([s(c) for c in config.mesh_spatial])
        self.rotate = FaceRotateConvolution(
            [s(c) for c in config.mesh_rotate], [s(c) for c in config.mesh_rotate_fusion]
        )
        self.kernel_correlation = FaceKernelCorrelation(
            s(config.mesh_kernels), config.mesh_kernel_size, config.mesh_kernel_sigma
        )

        blocks = []
        spatial_in = s(config.mesh_spatial[-1])
        structural_in = s(config.mesh_rotate_fusion[-1]) + s(config.mesh_kernels) + 3
        for _, _, spatial_out, structural_out in config.mesh_blocks:
            blocks.append(MeshConvolution(spatial_in, structural_in, s(spatial_out), s(structural_out)))
            spatial_in, structural_in = s(spatial_out), s(structural_out)
        self.blocks = nn.ModuleList(blocks)

        self.output_dim = config.scaled_feature_dim
        self.fusion = _mlp([spatial_in + structural_in, s(config.mesh_fusion), self.output_dim])

    def structural_descriptor(self, batch: MeshBatch) -> torch.Tensor:
        """
        ``(B, C, F)`` rotate features, kernel correlations and centers.
        """

        return torch.cat(
            [
                self.rotate(batch.corners),
                self.kernel_correlation(batch.normals, batch.neighbors),
                batch.centers.transpose(1, 2),
            ],
            dim=1,
        )

    def forward(self, batch: MeshBatch) -> torch.Tensor:
        """
        :param batch: Face descriptors of ``B`` meshes with ``F`` faces each.
        :return: ``(B, feature_dim)`` backbone features.
        :raises ValueError: On inconsistent shapes or a neighbor index outside ``0..F-1``.
        """

        size, faces = batch.centers.shape[:2]
        expected = {
            "centers": (size, faces, 3),
            "corners": (size, faces, 3, 3),
            "normals": (size, faces, 3),
            "neighbors": (size, faces, 3),
        }
        for name, shape in expected.items():
            if tuple(getattr(batch, name).shape) != shape:
                raise ValueError(f"mesh batch {name} has shape {tuple(getattr(batch, name).shape)}, expected {shape}")
        if batch.neighbors.numel() and (batch.neighbors.min() < 0 or batch.neighbors.max() >= faces):
            raise ValueError(f"neighbor index outside 0..{faces - 1}")

        spatial = self.spatial(batch.centers)
        structural = self.structural_descriptor(batch)
        for block in self.blocks:
            spatial, structural = block(spatial, structural, batch.neighbors)
        return self.fusion(torch.cat([spatial, structural], dim=1)).max(dim=-1).values
