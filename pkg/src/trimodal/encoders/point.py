import torch
import torch.nn as nn

from .config import EncoderConfig

__all__ = ["EdgeConv", "PointEncoder", "knn"]


def knn(features: torch.Tensor, k: int) -> torch.Tensor:
    """
    Indices of each point's ``k`` nearest neighbors in feature space.

    The point itself is excluded; equal distances go to the lower index.

    :param features: ``(B, N, C)`` per-point features.
    :param k: Number of neighbors.
    :return: ``(B, N, k)`` int64 indices.
    :raises ValueError: If ``k >= N``.
    """

    count = features.shape[1]
    if k >= count:
        raise ValueError(f"k={k} neighbors need more than {count} points")
    with torch.no_grad():
        distance = torch.cdist(features, features, compute_mode="donot_use_mm_for_euclid_dist")
        own = torch.eye(count, dtype=torch.bool, device=features.device)
        distance = distance.masked_fill(own, float("inf"))
        return torch.sort(distance, dim=-1, stable=True).indices[..., :k]


class EdgeConv(nn.Module):
    """
    One EdgeConv layer on a graph rebuilt from the current features.

    Edge features ``(x_i, x_j - x_i)`` go through a shared 1x1 convolution,
    batch norm and leaky ReLU, then are max-pooled over the ``k`` neighbors.
    """

    def __init__(self, in_channels: int, out_channels: int, k: int):
        super().__init__()
        self.k = k
        self.mlp = nn.Sequential(
            nn.Conv2d(2 * in_channels, out_channels, 1, bias=False),
            nn.BatchNorm2d(out_channels),
            nn.LeakyReLU(0.2),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """
        :param x: ``(B, N, C_in)``.
        :return: ``(B, N, C_out)``.
        """

        batch, count, channels = x.shape
        index = knn(x, self.k)
        neighbors = torch.gather(
            x.unsqueeze(1).expand(batch, count, count, channels),
            2,
            index.unsqueeze(-1).expand(batch, count, self.k, channels),
        )
        center = x.unsqueeze(2).expand(batch, count, self.k, channels)
        edges = torch.cat([center, neighbors - center], dim=-1).permute(0, 3, 1, 2)
        return self.mlp(edges).max(dim=-1).values.transpose(1, 2)


class PointEncoder(nn.Module):
    """
    DGCNN-style encoder: four EdgeConv layers, a per-point fully connected
    layer over their concatenation, and a global max pool.
    """

    def __init__(self, config: EncoderConfig):
        super().__init__()
        channels = [config.scaled(c) for c in config.edge_channels]
        layers = []
        in_channels = 3
        for out_channels in channels:
            layers.append(EdgeConv(in_channels, out_channels, config.k))
            in_channels = out_channels
        self.edge_convs = nn.ModuleList(layers)
        self.layer_dims = channels
        self.output_dim = config.scaled_feature_dim
        self.fuse = nn.Sequential(
            nn.Conv1d(sum(channels), self.output_dim, 1, bias=False),
            nn.BatchNorm1d(self.output_dim),
            nn.LeakyReLU(0.2),
        )

    def forward_with_layers(self, points: torch.Tensor) -> tuple[torch.Tensor, list[torch.Tensor]]:
        """
        Global feature plus every EdgeConv layer's per-point output.

        :param points: ``(B, N, 3)`` clouds.
        :return: ``(B, feature_dim)`` and four ``(B, N, C_l)`` tensors.
        :raises ValueError: On a shape mismatch or too few points for ``k``.
        """

        if points.dim() != 3 or points.shape[-1] != 3:
            raise ValueError(f"expected a (B, N, 3) point batch, got shape {tuple(points.shape)}")
        layers = []
        x = points
        for edge_conv in self.edge_convs:
            x = edge_conv(x)
            layers.append(x)
        fused = self.fuse(torch.cat(layers, dim=-1).transpose(1, 2))
        return fused.max(dim=-1).values, layers

    def forward(self, points: torch.Tensor) -> torch.Tensor:
        return self.forward_with_layers(points)[0]
