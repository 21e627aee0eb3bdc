"""
Procedural shape families with analytic part labels.

Each family builds a closed, convex triangle mesh around the origin and
labels every face with a global part id, so point-level ground truth for
segmentation falls out of surface sampling exactly. Deformations
(anisotropic scale, taper, tessellation) are drawn from the generator seed
unless given explicitly.
"""

import typing as t
from dataclasses import dataclass, field

import numpy as np

from .models import MeshObject

__all__ = [
    "FAMILIES",
    "FAMILY_PARTS",
    "PART_NAMES",
    "ShapeSpec",
    "generate_shape",
]

PART_NAMES: dict[int, str] = {
    0: "box/lid",
    1: "box/body",
    2: "cylinder/barrel",
    3: "cylinder/top",
    4: "cylinder/bottom",
    5: "cone/base",
    6: "cone/side",
    7: "sphere/surface",
}

FAMILY_PARTS: dict[str, list[int]] = {
    "box": [0, 1],
    "cylinder": [2, 3, 4],
    "cone": [5, 6],
    "sphere": [7],
}

FAMILIES: tuple[str, ...] = tuple(FAMILY_PARTS)


@dataclass
class ShapeSpec:
    """
    A procedural generator spec, as found in manifest lines.

    Attributes:
        family: One of :data:`FAMILIES`.
        params: Optional overrides: ``scale`` (3 floats), ``taper`` (in [0, 1)),
            ``segments`` (around the up axis, or grid cells per box side) and
            ``rings`` (along the up axis).
        seed: Seed the missing parameters are drawn from.
    """

    family: str
    params: dict[str, t.Any] = field(default_factory=dict)
    seed: int = 0

    @classmethod
    def from_dict(cls, record: dict[str, t.Any]) -> "ShapeSpec":
        if "family" not in record:
            raise ValueError("generator spec needs a 'family'")
        return cls(family=str(record["family"]), params=dict(record.get("params", {})), seed=int(record.get("seed", 0)))


def _weld(vertices: np.ndarray, faces: np.ndarray, decimals: int = 9) -> tuple[np.ndarray, np.ndarray]:
    """
    Merge coincident vertices so faces on either side of a seam share edges.
    """

    _, first, inverse = np.unique(np.round(vertices, decimals), axis=0, return_index=True, return_inverse=True)
    return vertices[first], inverse.reshape(-1)[faces]


def _orient_outward(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """
    Flip faces whose normal points toward the origin (convex shapes only).
    """

    tri = vertices[faces]
    normal = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    inward = np.sum(normal * tri.mean(axis=1), axis=1) < 0
    faces = faces.copy()
    faces[inward] = faces[inward][:, ::-1]
    return faces


def _ring(radius: float, y: float, segments: int) -> np.ndarray:
    angles = 2.0 * np.pi * np.arange(segments) / segments
    return np.stack([radius * np.cos(angles), np.full(segments, y), radius * np.sin(angles)], axis=1)


def _band(lower: int, upper: int, segments: int) -> list[tuple[int, int, int]]:
    """
    Triangles joining two rings of ``segments`` vertices starting at ``lower`` and ``upper``.
    """

    triangles = []
    for i in range(segments):
        j = (i + 1) % segments
        triangles.append((lower + i, lower + j, upper + j))
        triangles.append((lower + i, upper + j, upper + i))
    return triangles


def _fan(center: int, start: int, segments: int) -> list[tuple[int, int, int]]:
    return [(center, start + i, start + (i + 1) % segments) for i in range(segments)]


def _box(segments: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    grid = np.linspace(-1.0, 1.0, segments + 1)
    vertices: list[np.ndarray] = []
    faces: list[tuple[int, int, int]] = []
    parts: list[int] = []
    for axis in range(3):
        u_axis, v_axis = [a for a in range(3) if a != axis]
        for sign in (-1.0, 1.0):
            offset = sum(len(v) for v in vertices)
            side = np.zeros((segments + 1, segments + 1, 3))
            side[..., axis] = sign
            side[..., u_axis] = grid[:, None]
            side[..., v_axis] = grid[None, :]
            vertices.append(side.reshape(-1, 3))
            part = FAMILY_PARTS["box"][0 if (axis == 1 and sign > 0) else 1]
            for i in range(segments):
                for j in range(segments):
                    a = offset + i * (segments + 1) + j
                    b, c, d = a + 1, a + segments + 1, a + segments + 2
                    faces += [(a, c, d), (a, d, b)]
                    parts += [part, part]
    return np.concatenate(vertices), np.asarray(faces), np.asarray(parts)


def _cylinder(segments: int, rings: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    barrel, top, bottom = FAMILY_PARTS["cylinder"]
    levels = np.linspace(-1.0, 1.0, rings + 1)
    vertices = [_ring(1.0, y, segments) for y in levels]
    faces: list[tuple[int, int, int]] = []
    parts: list[int] = []
    for level in range(rings):
        band = _band(level * segments, (level + 1) * segments, segments)
        faces += band
        parts += [barrel] * len(band)
    bottom_center = len(levels) * segments
    top_center = bottom_center + 1
    vertices.append(np.array([[0.0, -1.0, 0.0], [0.0, 1.0, 0.0]]))
    faces += _fan(bottom_center, 0, segments)
    parts += [bottom] * segments
    faces += _fan(top_center, rings * segments, segments)
    parts += [top] * segments
    return np.concatenate(vertices), np.asarray(faces), np.asarray(parts)


def _cone(segments: int, rings: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    base, side = FAMILY_PARTS["cone"]
    vertices = [_ring(1.0 - level / rings, -1.0 + 2.0 * level / rings, segments) for level in range(rings)]
    faces: list[tuple[int, int, int]] = []
    parts: list[int] = []
    for level in range(rings - 1):
        band = _band(level * segments, (level + 1) * segments, segments)
        faces += band
        parts += [side] * len(band)
    apex = rings * segments
    base_center = apex + 1
    vertices.append(np.array([[0.0, 1.0, 0.0], [0.0, -1.0, 0.0]]))
    faces += _fan(apex, (rings - 1) * segments, segments)
    parts += [side] * segments
    faces += _fan(base_center, 0, segments)
    parts += [base] * segments
    return np.concatenate(vertices), np.asarray(faces), np.asarray(parts)


def _sphere(segments: int, rings: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rings = max(rings, 2)
    polar = np.pi * np.arange(1, rings) / rings
    vertices = [_ring(np.sin(theta), -np.cos(theta), segments) for theta in polar]
    faces: list[tuple[int, int, int]] = []
    for level in range(rings - 2):
        faces += _band(level * segments, (level + 1) * segments, segments)
    south = (rings - 1) * segments
    north = south + 1
    vertices.append(np.array([[0.0, -1.0, 0.0], [0.0, 1.0, 0.0]]))
    faces += _fan(south, 0, segments)
    faces += _fan(north, (rings - 2) * segments, segments)
    parts = np.full(len(faces), FAMILY_PARTS["sphere"][0])
    return np.concatenate(vertices), np.asarray(faces), parts


def _resolve_params(spec: ShapeSpec) -> dict[str, t.Any]:
    rng = np.random.default_rng([spec.seed, FAMILIES.index(spec.family)])
    drawn = {
        "scale": rng.uniform(0.6, 1.4, size=3).tolist(),
        "taper": float(rng.uniform(0.0, 0.4)) if spec.family in ("box", "cylinder") else 0.0,
        "segments": 4 if spec.family == "box" else int(rng.integers(12, 20)),
        "rings": int(rng.integers(3, 6)),
    }
    drawn.update(spec.params)
    if not 0.0 <= float(drawn["taper"]) < 1.0:
        raise ValueError(f"taper must be in [0, 1), got {drawn['taper']}")
    if int(drawn["segments"]) < (1 if spec.family == "box" else 3) or int(drawn["rings"]) < 1:
        raise ValueError(f"tessellation too coarse: {drawn}")
    return drawn


def generate_shape(
    spec: ShapeSpec | dict[str, t.Any],
    object_id: str = "",
    class_label: int | None = None,
) -> MeshObject:
    """
    Build one procedural mesh.

    :param spec: A :class:`ShapeSpec` or its manifest dict form.
    :param object_id: Identifier stored on the mesh.
    :param class_label: Optional class stored on the mesh.
    :return: A closed mesh with ``face_parts`` set.
    :raises ValueError: On an unknown family or invalid parameters.
    """

    if isinstance(spec, dict):
        spec = ShapeSpec.from_dict(spec)
    if spec.family not in FAMILY_PARTS:
        raise ValueError(f"unknown shape family {spec.family!r}, expected one of {', '.join(FAMILIES)}")

    params = _resolve_params(spec)
    segments, rings = int(params["segments"]), int(params["rings"])
    match spec.family:
        case "box":
            vertices, faces, parts = _box(segments)
        case "cylinder":
            vertices, faces, parts = _cylinder(segments, rings)
        case "cone":
            vertices, faces, parts = _cone(segments, rings)
        case _:
            vertices, faces, parts = _sphere(segments, rings)

    # taper shrinks the cross-section linearly toward the top (y = 1)
    shrink = 1.0 - float(params["taper"]) * (vertices[:, 1] + 1.0) / 2.0
    vertices = vertices * np.array([1.0, 0.0, 1.0]) * shrink[:, None] + vertices * np.array([0.0, 1.0, 0.0])
    vertices = vertices * np.asarray(params["scale"], dtype=np.float64)

    vertices, faces = _weld(vertices, faces)
    faces = _orient_outward(vertices, faces)
    return MeshObject(
        vertices=vertices,
        faces=faces,
        object_id=object_id,
        class_label=class_label,
        face_parts=parts,
    )
