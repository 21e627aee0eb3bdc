import torch
import torch.nn as nn
import torch.nn.functional as F

from .config import EncoderConfig

__all__ = ["BasicBlock", "ImageEncoder"]


class BasicBlock(nn.Module):
    """
    Two 3x3 convolutions with a residual connection (ResNet-18 block).
    """

    def __init__(self, in_channels: int, out_channels: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, out_channels, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(out_channels)
        self.conv2 = nn.Conv2d(out_channels, out_channels, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_channels)
        self.shortcut = nn.Identity()
        if stride != 1 or in_channels != out_channels:
            self.shortcut = nn.Sequential(
                nn.Conv2d(in_channels, out_channels, 1, stride=stride, bias=False),
                nn.BatchNorm2d(out_channels),
            )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = F.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return F.relu(out + self.shortcut(x))


class ImageEncoder(nn.Module):
    """
    ResNet-18 topology: a strided 7x7 stem, four stages of two basic blocks
    and a global average pool.

    Input is channels-last ``(B, H, W, 3)`` with values in [0, 1], the
    layout rendered views are stored in.
    """

    def __init__(self, config: EncoderConfig):
        super().__init__()
        channels = [config.scaled(c) for c in config.image_channels]
        self.stem = nn.Sequential(
            nn.Conv2d(3, channels[0], 7, stride=2, padding=3, bias=False),
            nn.BatchNorm2d(channels[0]),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(3, stride=2, padding=1),
        )
        stages = []
        in_channels = channels[0]
        for index, out_channels in enumerate(channels):
            stride = 1 if index == 0 else 2
            stages.append(nn.Sequential(BasicBlock(in_channels, out_channels, stride), BasicBlock(out_channels, out_channels)))
            in_channels = out_channels
        self.stages = nn.Sequential(*stages)
        self.out = nn.Linear(in_channels, config.scaled_feature_dim) if in_channels != config.scaled_feature_dim else nn.Identity()
        self.output_dim = config.scaled_feature_dim

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        """
        :param images: ``(B, H, W, 3)`` batch.
        :return: ``(B, feature_dim)`` backbone features.
        :raises ValueError: If the input isn't a channels-last RGB batch.
        """

        if images.dim() != 4 or images.shape[-1] != 3:
            raise ValueError(f"expected a (B, H, W, 3) image batch, got shape {tuple(images.shape)}")
        x = self.stem(images.permute(0, 3, 1, 2).contiguous())
        x = self.stages(x)
        return self.out(torch.flatten(F.adaptive_avg_pool2d(x, 1), 1))
