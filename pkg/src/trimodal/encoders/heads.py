import torch
import torch.nn as nn

__all__ = ["ProjectionHead"]


class ProjectionHead(nn.Module):
    """
    Two fully connected layers with a ReLU between them, mapping backbone
    features into the universal space.
    """

    def __init__(self, in_dim: int, hidden_dim: int, out_dim: int):
        super().__init__()
        self.net = nn.Sequential(nn.Linear(in_dim, hidden_dim), nn.ReLU(), nn.Linear(hidden_dim, out_dim))

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        return self.net(features)
