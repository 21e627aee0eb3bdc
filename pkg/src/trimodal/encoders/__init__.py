from .checkpoint import latest_checkpoint, load_checkpoint, save_checkpoint
from .config import EncoderConfig
from .heads import ProjectionHead
from .image import ImageEncoder
from .mesh import MeshBatch, MeshEncoder
from .point import EdgeConv, PointEncoder, knn
from .network import TriModalNetwork

__all__ = [
    "EdgeConv",
    "EncoderConfig",
    "ImageEncoder",
    "MeshBatch",
    "MeshEncoder",
    "PointEncoder",
    "ProjectionHead",
    "TriModalNetwork",
    "knn",
    "latest_checkpoint",
    "load_checkpoint",
    "save_checkpoint",
]
