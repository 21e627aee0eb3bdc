from .features import FeatureTable, extract_feature_table, select_views
from .probe import FewShotResult, few_shot_probe, linear_probe, probe_chance_baseline
from .segmentation import (
    SegmentationConfig,
    SegmentationHead,
    SegmentationMetrics,
    part_segmentation,
    segmentation_metrics,
)

__all__ = [
    "FeatureTable",
    "FewShotResult",
    "SegmentationConfig",
    "SegmentationHead",
    "SegmentationMetrics",
    "extract_feature_table",
    "few_shot_probe",
    "linear_probe",
    "part_segmentation",
    "probe_chance_baseline",
    "segmentation_metrics",
    "select_views",
]
