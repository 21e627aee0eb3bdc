import enum
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FaceFeatureSet",
    "ImageView",
    "MeshObject",
    "Modality",
    "PointCloud",
    "SegmentationRecord",
    "Split",
    "TriModalSample",
]


class Modality(enum.StrEnum):
    """
    The three representations of a 3D object the framework learns from.
    """

    MESH = "mesh"
    POINT = "point"
    IMAGE = "image"


class Split(enum.StrEnum):
    """
    Dataset split an object belongs to.
    """

    TRAIN = "train"
    TEST = "test"


@dataclass
class MeshObject:
    """
    A raw triangle mesh.

    Attributes:
        vertices: ``(V, 3)`` float64 coordinates in model units.
        faces: ``(F, 3)`` int64 vertex-index triples.
        object_id: Opaque identifier, unique within a dataset.
        class_label: Optional integer class.
        face_parts: Optional ``(F,)`` part id per face (procedural shapes only).
    """

    vertices: np.ndarray
    faces: np.ndarray
    object_id: str = ""
    class_label: int | None = None
    face_parts: np.ndarray | None = None

    def __post_init__(self):
        """
        Coerce arrays to their canonical dtypes and check the mesh invariants.

        :raises ValueError: On an empty face list, an out-of-range index, or
            a face that repeats a vertex.
        """

        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if len(self.faces) == 0:
            raise ValueError(f"mesh {self.object_id!r} has no faces")
        if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
            raise ValueError(
                f"mesh {self.object_id!r} references a vertex outside 0..{len(self.vertices) - 1}"
            )
        repeated = (
            (self.faces[:, 0] == self.faces[:, 1])
            | (self.faces[:, 1] == self.faces[:, 2])
            | (self.faces[:, 0] == self.faces[:, 2])
        )
        if repeated.any():
            raise ValueError(
                f"mesh {self.object_id!r} has {int(repeated.sum())} face(s) with repeated vertices"
            )
        if self.face_parts is not None:
            self.face_parts = np.asarray(self.face_parts, dtype=np.int64).reshape(-1)
            if len(self.face_parts) != len(self.faces):
                raise ValueError("face_parts must have one entry per face")

    @property
    def triangles(self) -> np.ndarray:
        """
        ``(F, 3, 3)`` corner coordinates of every face.
        """

        return self.vertices[self.faces]

    @property
    def face_areas(self) -> np.ndarray:
        """
        ``(F,)`` triangle areas.
        """

        tri = self.triangles
        return 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)


@dataclass
class PointCloud:
    """
    An ``(N, 3)`` point set, unit-sphere normalized once it leaves the sampler.
    """

    points: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points).reshape(-1, 3)

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class ImageView:
    """
    One rendered view of an object.

    Attributes:
        pixels: ``(H, W, 3)`` float32 values in [0, 1].
        camera_position: Camera location (unit direction scaled by the camera radius).
        view_index: Index of the view within the object's rendered pool.
    """

    pixels: np.ndarray
    camera_position: np.ndarray
    view_index: int = 0

    @property
    def resolution(self) -> tuple[int, int]:
        return int(self.pixels.shape[0]), int(self.pixels.shape[1])


@dataclass
class FaceFeatureSet:
    """
    Fixed-size per-face descriptors consumed by the mesh encoder.

    Attributes:
        centers: ``(F, 3)`` face centers (vertex mean).
        corners: ``(F, 3, 3)`` corner vectors, each vertex minus the face center.
        normals: ``(F, 3)`` unit face normals.
        neighbor_index: ``(F, 3)`` indices of the faces across each edge
            (the face's own index where the edge is a boundary).
    """

    centers: np.ndarray
    corners: np.ndarray
    normals: np.ndarray
    neighbor_index: np.ndarray

    def __len__(self) -> int:
        return len(self.centers)


@dataclass
class TriModalSample:
    """
    One object in all three modalities: the unit of a contrastive minibatch.

    Attributes:
        mesh: Face descriptors of the object.
        point_cloud: Sampled, normalized points.
        views: Rendered views (the pre-rendered pool, or the subset loaded).
        object_id: Identifier shared by every field.
        class_label: Optional integer class.
    """

    mesh: FaceFeatureSet
    point_cloud: PointCloud
    views: list[ImageView] = field(default_factory=list)
    object_id: str = ""
    class_label: int | None = None


@dataclass
class SegmentationRecord:
    """
    A point cloud with one part label per point.

    Attributes:
        points: ``(N, 3)`` unit-sphere normalized coordinates.
        labels: ``(N,)`` global part ids.
        category: Shape category name; its part set is looked up in a category map.
        object_id: Identifier of the source shape.
    """

    points: np.ndarray
    labels: np.ndarray
    category: str
    object_id: str = ""

    def __post_init__(self):
        self.points = np.asarray(self.points).reshape(-1, 3)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if len(self.labels) != len(self.points):
            raise ValueError(
                f"{len(self.labels)} labels for {len(self.points)} points in {self.object_id!r}"
            )
