import torch
import torch.nn as nn

from .config import EncoderConfig
from .heads import ProjectionHead
from .image import ImageEncoder
from .mesh import MeshBatch, MeshEncoder
from .point import PointEncoder
from ..dataprep.models import Modality

__all__ = ["TriModalNetwork"]


class TriModalNetwork(nn.Module):
    """
    The three backbones and their projection heads.

    :param config: Architecture settings.
    """

    def __init__(self, config: EncoderConfig | None = None):
        super().__init__()
        self.config = config or EncoderConfig()
        self.mesh_encoder = MeshEncoder(self.config)
        self.point_encoder = PointEncoder(self.config)
        self.image_encoder = ImageEncoder(self.config)
        feature_dim = self.config.scaled_feature_dim
        self.heads = nn.ModuleDict(
            {
                str(modality): ProjectionHead(feature_dim, feature_dim, self.config.embed_dim)
                for modality in Modality
            }
        )

    def encoder(self, modality: Modality | str) -> nn.Module:
        match Modality(modality):
            case Modality.MESH:
                return self.mesh_encoder
            case Modality.POINT:
                return self.point_encoder
            case _:
                return self.image_encoder

    def subnetworks(self) -> dict[str, nn.Module]:
        """
        The six independently parameterized networks, by name.
        """

        networks: dict[str, nn.Module] = {}
        for modality in Modality:
            networks[f"{modality}_encoder"] = self.encoder(modality)
            networks[f"{modality}_head"] = self.heads[str(modality)]
        return networks

    def backbone(self, modality: Modality | str, inputs: MeshBatch | torch.Tensor) -> torch.Tensor:
        """
        Backbone features of one modality.

        :param modality: Which encoder to run.
        :param inputs: A :class:`MeshBatch`, a ``(B, N, 3)`` point batch or a
            ``(B, H, W, 3)`` image batch.
        :return: ``(B, feature_dim)`` features.
        :raises ValueError: On an unknown modality or mismatched inputs.
        """

        return self.encoder(modality)(inputs)

    def project(self, features: torch.Tensor, head: Modality | str) -> torch.Tensor:
        """
        Map backbone features into the universal space.

        :param features: ``(B, feature_dim)`` backbone features.
        :param head: Modality whose head to use.
        :return: ``(B, embed_dim)`` universal features.
        :raises ValueError: If ``head`` isn't a modality.
        """

        try:
            key = str(Modality(head))
        except ValueError:
            raise ValueError(f"unknown projection head {head!r}") from None
        return self.heads[key](features)

    def universal(self, modality: Modality | str, inputs: MeshBatch | torch.Tensor) -> torch.Tensor:
        return self.project(self.backbone(modality, inputs), modality)

    def embed(
        self,
        mesh: MeshBatch,
        points: torch.Tensor,
        first_views: torch.Tensor,
        second_views: torch.Tensor,
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
        """
        Universal features of a tri-modal batch: mesh, points and two views.

        Both view batches go through the image encoder as one batch.

        :return: ``(f_m, f_p, f_i1, f_i2)``, each ``(B, embed_dim)``.
        """

        size = len(mesh)
        images = self.universal(Modality.IMAGE, torch.cat([first_views, second_views], dim=0))
        return (
            self.universal(Modality.MESH, mesh),
            self.universal(Modality.POINT, points),
            images[:size],
            images[size:],
        )

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())
