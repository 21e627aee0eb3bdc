from .contrastive import LossBreakdown, LossWeights, Temperature, similarity, total_loss
from .dataprep import (
    DatasetArchive,
    MeshObject,
    Modality,
    PointCloud,
    PrepConfig,
    Split,
    TriModalSample,
    build_dataset,
    load_mesh,
    render_views,
    sample_point_cloud,
    write_toy_manifest,
)
from .encoders import EncoderConfig, TriModalNetwork, load_checkpoint, save_checkpoint
from .errors import DatasetBuildError, DatasetMismatchError, NonFiniteLossError, OffParseError, TrimodalError
from .eval import extract_feature_table, few_shot_probe, linear_probe, part_segmentation
from .retrieval import RetrievalIndex, evaluate_retrieval, mean_average_precision
from .trainer import TrainConfig, fit, train_step

__all__ = [
    "DatasetArchive",
    "DatasetBuildError",
    "DatasetMismatchError",
    "EncoderConfig",
    "LossBreakdown",
    "LossWeights",
    "MeshObject",
    "Modality",
    "NonFiniteLossError",
    "OffParseError",
    "PointCloud",
    "PrepConfig",
    "RetrievalIndex",
    "Split",
    "Temperature",
    "TrainConfig",
    "TriModalNetwork",
    "TriModalSample",
    "TrimodalError",
    "build_dataset",
    "evaluate_retrieval",
    "extract_feature_table",
    "few_shot_probe",
    "fit",
    "linear_probe",
    "load_checkpoint",
    "load_mesh",
    "mean_average_precision",
    "part_segmentation",
    "render_views",
    "sample_point_cloud",
    "save_checkpoint",
    "similarity",
    "total_loss",
    "train_step",
]
