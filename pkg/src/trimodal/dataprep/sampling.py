import numpy as np

from .models import MeshObject, PointCloud

__all__ = [
    "farthest_point_sample",
    "normalize_mesh",
    "normalize_unit_sphere",
    "sample_point_cloud",
    "sample_surface",
]


def farthest_point_sample(points: np.ndarray, n: int, start: int = 0) -> np.ndarray:
    """
    Greedy max-min subset selection.

    Each step picks the point whose distance to the already-selected set is
    largest; ties go to the lowest index (``np.argmax`` returns the first
    maximum). Selected points are masked out so duplicated coordinates can
    never be picked twice.

    :param points: ``(M, D)`` candidate coordinates.
    :param n: How many indices to select.
    :param start: Index of the first selected point.
    :return: ``(n,)`` int64 indices in selection order.
    :raises ValueError: If ``n > M`` or ``start`` is out of range.
    """

    points = np.asarray(points, dtype=np.float64)
    total = len(points)
    if n > total:
        raise ValueError(f"cannot select {n} of {total} points")
    if n <= 0:
        return np.empty(0, dtype=np.int64)
    if not 0 <= start < total:
        raise ValueError(f"start index {start} outside 0..{total - 1}")

    selected = np.empty(n, dtype=np.int64)
    min_distance = np.full(total, np.inf)
    current = start
    for step in range(n):
        selected[step] = current
        min_distance[current] = -np.inf
        distance = np.sum((points - points[current]) ** 2, axis=1)
        np.minimum(min_distance, distance, out=min_distance, where=min_distance > -np.inf)
        current = int(np.argmax(min_distance))
    return selected


def sample_surface(mesh: MeshObject, count: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """
    Draw points uniformly over the mesh surface.

    Faces are chosen with probability proportional to their area and a point
    is placed inside each chosen face with uniform barycentric coordinates
    (the ``u + v > 1`` half is reflected back into the triangle).

    :param mesh: Source mesh.
    :param count: Number of points.
    :param rng: Random generator to draw from.
    :return: ``(count, 3)`` points and the ``(count,)`` face index of each.
    :raises ValueError: If the mesh has zero total area.
    """

    areas = mesh.face_areas
    total_area = float(areas.sum())
    if not total_area > 0.0:
        raise ValueError(f"mesh {mesh.object_id!r} has zero surface area")

    face_index = rng.choice(len(areas), size=count, p=areas / total_area)
    u = rng.random(count)
    v = rng.random(count)
    flip = u + v > 1.0
    u[flip], v[flip] = 1.0 - u[flip], 1.0 - v[flip]

    tri = mesh.triangles[face_index]
    points = tri[:, 0] + u[:, None] * (tri[:, 1] - tri[:, 0]) + v[:, None] * (tri[:, 2] - tri[:, 0])
    return points, face_index


def normalize_unit_sphere(points: np.ndarray) -> np.ndarray:
    """
    Center points at their centroid and scale the farthest one onto the unit sphere.

    :param points: ``(N, 3)`` coordinates.
    :return: Normalized float64 copy.
    :raises ValueError: If every point coincides.
    """

    centered = np.asarray(points, dtype=np.float64) - np.mean(points, axis=0)
    radius = float(np.max(np.linalg.norm(centered, axis=1)))
    if radius == 0.0:
        raise ValueError("cannot normalize a point set with zero extent")
    return centered / radius


def normalize_mesh(mesh: MeshObject) -> MeshObject:
    """
    Move a mesh to its area-weighted surface centroid and scale it into the unit sphere.

    :param mesh: Source mesh (unchanged).
    :return: A new mesh whose farthest vertex lies at distance 1 from the origin.
    :raises ValueError: If the mesh has zero area.
    """

    areas = mesh.face_areas
    if not areas.sum() > 0.0:
        raise ValueError(f"mesh {mesh.object_id!r} has zero surface area")
    centroid = (mesh.triangles.mean(axis=1) * areas[:, None]).sum(axis=0) / areas.sum()
    vertices = mesh.vertices - centroid
    vertices /= np.max(np.linalg.norm(vertices, axis=1))
    return MeshObject(
        vertices=vertices,
        faces=mesh.faces.copy(),
        object_id=mesh.object_id,
        class_label=mesh.class_label,
        face_parts=mesh.face_parts,
    )


def sample_point_cloud(
    mesh: MeshObject,
    n: int = 2048,
    oversample: int = 4,
    seed: int | np.random.SeedSequence = 0,
    start: int | None = 0,
    return_faces: bool = False,
) -> PointCloud | tuple[PointCloud, np.ndarray]:
    """
    Sample a unit-sphere normalized point cloud from a mesh surface.

    ``oversample * n`` surface candidates are drawn, farthest-point sampling
    keeps ``n`` of them, and the result is centered and scaled onto the unit
    sphere.

    :param mesh: Source mesh.
    :param n: Points in the output cloud.
    :param oversample: Candidate pool size as a multiple of ``n``.
    :param seed: Seed for the surface draw.
    :param start: FPS start index; ``None`` derives it from ``seed``.
    :param return_faces: Also return the source face of every kept point.
    :return: The cloud, plus the ``(n,)`` face indices when ``return_faces`` is set.
    :raises ValueError: On a zero-area mesh or ``oversample < 1``.
    """

    if oversample < 1:
        raise ValueError("oversample must be at least 1")
    rng = np.random.default_rng(seed)
    candidates, face_index = sample_surface(mesh, count=oversample * n, rng=rng)
    if start is None:
        start = int(rng.integers(len(candidates)))
    keep = farthest_point_sample(candidates, n=n, start=start)
    cloud = PointCloud(points=normalize_unit_sphere(candidates[keep]))
    if return_faces:
        return cloud, face_index[keep]
    return cloud
