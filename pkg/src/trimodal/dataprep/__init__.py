from .archive import DatasetArchive, read_segmentation_records, write_segmentation_records
from .augment import augment, augment_image, augment_mesh, augment_points
from .builder import PrepConfig, build_dataset, build_part_dataset, write_toy_manifest
from .faces import extract_face_features
from .models import (
    FaceFeatureSet,
    ImageView,
    MeshObject,
    Modality,
    PointCloud,
    SegmentationRecord,
    Split,
    TriModalSample,
)
from .parser import load_mesh, parse_off
from .render import PhongShading, render_views, shade
from .sampling import (
    farthest_point_sample,
    normalize_mesh,
    normalize_unit_sphere,
    sample_point_cloud,
    sample_surface,
)
from .shapes import FAMILY_PARTS, generate_shape

__all__ = [
    "DatasetArchive",
    "FAMILY_PARTS",
    "FaceFeatureSet",
    "ImageView",
    "MeshObject",
    "Modality",
    "PhongShading",
    "PointCloud",
    "PrepConfig",
    "SegmentationRecord",
    "Split",
    "TriModalSample",
    "augment",
    "augment_image",
    "augment_mesh",
    "augment_points",
    "build_dataset",
    "build_part_dataset",
    "extract_face_features",
    "farthest_point_sample",
    "generate_shape",
    "load_mesh",
    "normalize_mesh",
    "normalize_unit_sphere",
    "parse_off",
    "read_segmentation_records",
    "render_views",
    "sample_point_cloud",
    "sample_surface",
    "shade",
    "write_segmentation_records",
    "write_toy_manifest",
]
