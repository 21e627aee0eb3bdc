from dataclasses import dataclass

__all__ = ["EncoderConfig"]


@dataclass(frozen=True)
class EncoderConfig:
    """
    Architecture of the three backbones and their projection heads.

    Channel lists are given at full width; every layer is built with
    :meth:`scaled` channels so one factor shrinks the whole network.

    Attributes:
        width_scale: Multiplier applied to every channel count.
        k: Neighbors per point in each EdgeConv graph.
        faces: Face budget the mesh encoder is fed.
        embed_dim: Width of the universal (projection) space.
        feature_dim: Width of the backbone features.
        image_channels: Output channels of the four residual stages.
        edge_channels: Output channels of the four EdgeConv layers.
        mesh_spatial: Spatial descriptor layers.
        mesh_rotate: Shared layers applied to each corner-vector pair.
        mesh_rotate_fusion: Layers applied after averaging the pairs.
        mesh_kernels: Number of face kernel correlation kernels.
        mesh_kernel_size: Unit vectors per kernel.
        mesh_kernel_sigma: Gaussian bandwidth of kernel correlation.
        mesh_blocks: ``(spatial_in, structural_in, spatial_out, structural_out)``
            per mesh convolution block.
        mesh_fusion: Width of the per-face layer fusing both blocks.
    """

    width_scale: float = 1.0
    k: int = 20
    faces: int = 1024
    embed_dim: int = 128
    feature_dim: int = 512
    image_channels: tuple[int, int, int, int] = (64, 128, 256, 512)
    edge_channels: tuple[int, int, int, int] = (64, 64, 64, 128)
    mesh_spatial: tuple[int, int] = (64, 64)
    mesh_rotate: tuple[int, int] = (32, 32)
    mesh_rotate_fusion: tuple[int, int] = (64, 64)
    mesh_kernels: int = 64
    mesh_kernel_size: int = 4
    mesh_kernel_sigma: float = 0.2
    mesh_blocks: tuple[tuple[int, int, int, int], ...] = ((64, 131, 256, 256), (256, 256, 512, 512))
    mesh_fusion: int = 1024

    def __post_init__(self):
        if not self.width_scale > 0:
            raise ValueError("width_scale must be positive")
        for name in ("k", "faces", "embed_dim", "feature_dim", "mesh_kernels", "mesh_kernel_size", "mesh_fusion"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not self.mesh_kernel_sigma > 0:
            raise ValueError("mesh_kernel_sigma must be positive")
        channel_lists = (
            self.image_channels,
            self.edge_channels,
            self.mesh_spatial,
            self.mesh_rotate,
            self.mesh_rotate_fusion,
            *self.mesh_blocks,
        )
        if any(channels < 1 for channel_list in channel_lists for channels in channel_list):
            raise ValueError("channel counts must be positive")

        # the first block consumes the spatial descriptor and the structural
        # descriptor (rotate features, kernel correlations, 3 center coordinates)
        first = self.mesh_blocks[0]
        if first[0] != self.mesh_spatial[-1]:
            raise ValueError(f"first mesh block expects {first[0]} spatial channels, descriptor gives {self.mesh_spatial[-1]}")
        structural = self.mesh_rotate_fusion[-1] + self.mesh_kernels + 3
        if first[1] != structural:
            raise ValueError(f"first mesh block expects {first[1]} structural channels, descriptors give {structural}")
        for previous, block in zip(self.mesh_blocks, self.mesh_blocks[1:]):
            if block[:2] != previous[2:]:
                raise ValueError(f"mesh block {block} doesn't continue {previous}")

    def scaled(self, channels: int) -> int:
        """
        ``channels`` multiplied by the width scale, at least 1.
        """

        return max(1, round(channels * self.width_scale))

    @property
    def scaled_feature_dim(self) -> int:
        return self.scaled(self.feature_dim)
