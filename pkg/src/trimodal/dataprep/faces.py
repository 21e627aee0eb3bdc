import logging
from collections import defaultdict

import numpy as np

from .models import FaceFeatureSet, MeshObject

__all__ = ["extract_face_features", "face_adjacency"]

log = logging.getLogger(__name__)


def face_adjacency(faces: np.ndarray) -> np.ndarray:
    """
    For every face, the face across each of its three edges.

    Edge ``e`` of a face runs from corner ``e`` to corner ``(e + 1) % 3``.
    Where several faces share an edge (non-manifold input) the lowest other
    index wins; boundary edges point back at the face itself.

    :param faces: ``(F, 3)`` vertex indices.
    :return: ``(F, 3)`` int64 face indices.
    """

    edges: dict[tuple[int, int], list[int]] = defaultdict(list)
    for face, corners in enumerate(faces.tolist()):
        for e in range(3):
            a, b = corners[e], corners[(e + 1) % 3]
            edges[(min(a, b), max(a, b))].append(face)

    neighbors = np.empty((len(faces), 3), dtype=np.int64)
    for face, corners in enumerate(faces.tolist()):
        for e in range(3):
            a, b = corners[e], corners[(e + 1) % 3]
            others = [other for other in edges[(min(a, b), max(a, b))] if other != face]
            neighbors[face, e] = min(others) if others else face
    return neighbors


def extract_face_features(
    mesh: MeshObject,
    target_faces: int = 1024,
    seed: int | np.random.SeedSequence = 0,
) -> FaceFeatureSet:
    """
    Build the fixed-size per-face descriptor set the mesh encoder consumes.

    Zero-area faces are dropped first. Meshes with more than ``target_faces``
    faces keep a seeded uniform subset (in original order; neighbors that
    fall outside the subset become self references). Meshes with fewer are
    repeat-padded cyclically, each copy's neighbors pointing into the same
    copy where that copy is complete.

    :param mesh: Source mesh.
    :param target_faces: Face budget ``F``.
    :param seed: Seed for subsampling.
    :return: Descriptors with exactly ``target_faces`` faces, as float32.
    :raises ValueError: If every face is degenerate or ``target_faces < 1``.
    """

    if target_faces < 1:
        raise ValueError("target_faces must be at least 1")

    tri = mesh.triangles
    cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    lengths = np.linalg.norm(cross, axis=1)
    valid = lengths > 1e-12
    if not valid.any():
        raise ValueError(f"mesh {mesh.object_id!r} has only degenerate faces")
    if not valid.all():
        log.warning(f"{mesh.object_id or 'mesh'}: dropped {int((~valid).sum())} zero-area face(s)")

    faces = mesh.faces[valid]
    tri = tri[valid]
    normals = cross[valid] / lengths[valid, None]
    centers = tri.mean(axis=1)
    corners = tri - centers[:, None, :]
    neighbors = face_adjacency(faces)
    count = len(faces)

    if count > target_faces:
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(count, size=target_faces, replace=False))
        remap = np.full(count, -1, dtype=np.int64)
        remap[keep] = np.arange(target_faces)
        neighbors = remap[neighbors[keep]]
        own = np.arange(target_faces)[:, None]
        neighbors = np.where(neighbors < 0, own, neighbors)
        centers, corners, normals = centers[keep], corners[keep], normals[keep]
    elif count < target_faces:
        source = np.arange(target_faces) % count
        block = np.arange(target_faces) // count
        shifted = neighbors[source] + (block * count)[:, None]
        neighbors = np.where(shifted < target_faces, shifted, neighbors[source])
        centers, corners, normals = centers[source], corners[source], normals[source]

    return FaceFeatureSet(
        centers=centers.astype(np.float32),
        corners=corners.astype(np.float32),
        normals=normals.astype(np.float32),
        neighbor_index=neighbors.astype(np.int64),
    )
