"""
A small z-buffered software rasterizer with flat Phong shading.

Cameras sit on a sphere around the object and look at its vertex centroid;
the single white light is co-located with the camera. Faces are lit from
whichever side faces the camera, since meshes in the wild rarely have
consistent winding.
"""

import math
from dataclasses import dataclass

import numpy as np

from .models import ImageView, MeshObject

__all__ = [
    "PhongShading",
    "look_at",
    "random_camera_positions",
    "render_view",
    "render_views",
    "shade",
]

UP_AXIS = np.array([0.0, 1.0, 0.0])


@dataclass(frozen=True)
class PhongShading:
    """
    Reflection constants and camera intrinsics of the renderer.

    Attributes:
        ambient: Ambient coefficient.
        diffuse: Lambertian coefficient.
        specular: Specular coefficient.
        shininess: Specular exponent.
        material: RGB albedo (grey).
        light: RGB light intensity (white).
        camera_radius: Distance of every camera from the look-at point.
        fov_degrees: Vertical field of view.
    """

    ambient: float = 0.1
    diffuse: float = 0.7
    specular: float = 0.2
    shininess: float = 32.0
    material: tuple[float, float, float] = (0.8, 0.8, 0.8)
    light: tuple[float, float, float] = (1.0, 1.0, 1.0)
    camera_radius: float = 2.5
    fov_degrees: float = 50.0


def shade(
    normal: np.ndarray,
    light_dir: np.ndarray,
    view_dir: np.ndarray,
    shading: PhongShading = PhongShading(),
) -> np.ndarray:
    """
    Phong reflection for one or many surface elements.

    :param normal: ``(..., 3)`` unit normals.
    :param light_dir: ``(..., 3)`` unit vectors from the surface to the light.
    :param view_dir: ``(..., 3)`` unit vectors from the surface to the camera.
    :param shading: Reflection constants.
    :return: ``(..., 3)`` RGB values clipped to [0, 1].
    """

    normal = np.asarray(normal, dtype=np.float64)
    light_dir = np.asarray(light_dir, dtype=np.float64)
    view_dir = np.asarray(view_dir, dtype=np.float64)
    material = np.asarray(shading.material)
    light = np.asarray(shading.light)

    n_dot_l = np.sum(normal * light_dir, axis=-1, keepdims=True)
    reflected = 2.0 * n_dot_l * normal - light_dir
    r_dot_v = np.clip(np.sum(reflected * view_dir, axis=-1, keepdims=True), 0.0, None)

    color = light * material * (shading.ambient + shading.diffuse * np.clip(n_dot_l, 0.0, None))
    color = color + light * shading.specular * r_dot_v**shading.shininess
    return np.clip(color, 0.0, 1.0)


def random_camera_positions(count: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """
    Draw camera locations uniformly on a sphere.

    :param count: Number of cameras.
    :param radius: Sphere radius.
    :param rng: Random generator.
    :return: ``(count, 3)`` positions.
    """

    directions = rng.normal(size=(count, 3))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    # a zero draw maps to the up axis
    directions = np.where(norms > 0, directions / np.maximum(norms, 1e-12), UP_AXIS)
    return directions * radius


def look_at(eye: np.ndarray, target: np.ndarray) -> np.ndarray:
    """
    World-to-camera rotation for a camera at ``eye`` looking at ``target``.

    :param eye: Camera position.
    :param target: Look-at point.
    :return: ``(3, 3)`` matrix whose rows are the camera's right, up and forward axes.
    """

    forward = target - eye
    forward = forward / np.linalg.norm(forward)
    up = UP_AXIS if abs(forward @ UP_AXIS) < 0.999 else np.array([0.0, 0.0, 1.0])
    right = np.cross(forward, up)
    right /= np.linalg.norm(right)
    true_up = np.cross(right, forward)
    return np.stack([right, true_up, forward])


def render_view(
    mesh: MeshObject,
    camera_position: np.ndarray,
    resolution: tuple[int, int] = (64, 64),
    shading: PhongShading = PhongShading(),
    view_index: int = 0,
) -> ImageView:
    """
    Rasterize one view of a mesh.

    :param mesh: Unit-sphere normalized mesh.
    :param camera_position: Camera location.
    :param resolution: ``(H, W)`` of the image.
    :param shading: Reflection constants and intrinsics.
    :param view_index: Index stored on the returned view.
    :return: The rendered view; background pixels are 0.
    :raises ValueError: On a non-positive resolution.
    """

    height, width = resolution
    if height <= 0 or width <= 0:
        raise ValueError(f"resolution must be positive, got {resolution}")

    eye = np.asarray(camera_position, dtype=np.float64)
    target = mesh.vertices.mean(axis=0)
    rotation = look_at(eye, target)
    focal = 1.0 / math.tan(math.radians(shading.fov_degrees) / 2.0)

    camera = (mesh.vertices - eye) @ rotation.T
    depth = camera[:, 2]
    visible = depth > 1e-6
    safe_depth = np.where(visible, depth, 1.0)
    # pixel centers sit at integer coordinates; row 0 is the top of the image
    px = (camera[:, 0] / safe_depth * focal + 1.0) * 0.5 * width - 0.5
    py = (1.0 - (camera[:, 1] / safe_depth * focal + 1.0) * 0.5) * height - 0.5

    tri = mesh.triangles
    normals = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    lengths = np.linalg.norm(normals, axis=1, keepdims=True)
    normals = normals / np.where(lengths > 0, lengths, 1.0)
    to_eye = eye - tri.mean(axis=1)
    to_eye /= np.linalg.norm(to_eye, axis=1, keepdims=True)
    normals = np.where(np.sum(normals * to_eye, axis=1, keepdims=True) < 0, -normals, normals)
    colors = shade(normals, to_eye, to_eye, shading)

    pixels = np.zeros((height, width, 3), dtype=np.float32)
    inverse_depth_buffer = np.zeros((height, width))

    for face, (a, b, c) in enumerate(mesh.faces):
        if not (visible[a] and visible[b] and visible[c]):
            continue
        xs = np.array([px[a], px[b], px[c]])
        ys = np.array([py[a], py[b], py[c]])
        area = (xs[1] - xs[0]) * (ys[2] - ys[0]) - (xs[2] - xs[0]) * (ys[1] - ys[0])
        if abs(area) < 1e-12:
            continue

        x0, x1 = max(int(math.ceil(xs.min())), 0), min(int(math.floor(xs.max())), width - 1)
        y0, y1 = max(int(math.ceil(ys.min())), 0), min(int(math.floor(ys.max())), height - 1)
        if x0 > x1 or y0 > y1:
            continue

        grid_y, grid_x = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
        w0 = ((xs[1] - grid_x) * (ys[2] - grid_y) - (xs[2] - grid_x) * (ys[1] - grid_y)) / area
        w1 = ((xs[2] - grid_x) * (ys[0] - grid_y) - (xs[0] - grid_x) * (ys[2] - grid_y)) / area
        w2 = 1.0 - w0 - w1
        inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
        if not inside.any():
            continue

        # 1/z is affine in screen space, so it interpolates exactly
        inverse_depth = w0 / depth[a] + w1 / depth[b] + w2 / depth[c]
        window = inverse_depth_buffer[y0 : y1 + 1, x0 : x1 + 1]
        closer = inside & (inverse_depth > window)
        window[closer] = inverse_depth[closer]
        pixels[y0 : y1 + 1, x0 : x1 + 1][closer] = colors[face]

    return ImageView(pixels=pixels, camera_position=eye, view_index=view_index)


def render_views(
    mesh: MeshObject,
    num_views: int,
    resolution: tuple[int, int] = (64, 64),
    seed: int | np.random.SeedSequence = 0,
    shading: PhongShading = PhongShading(),
    camera_positions: np.ndarray | None = None,
) -> list[ImageView]:
    """
    Render a mesh from cameras placed uniformly at random on a sphere.

    :param mesh: Unit-sphere normalized mesh.
    :param num_views: Number of views.
    :param resolution: ``(H, W)`` of every image.
    :param seed: Seed for the camera placement.
    :param shading: Reflection constants and intrinsics.
    :param camera_positions: Fixed ``(num_views, 3)`` camera locations,
        bypassing random placement.
    :return: ``num_views`` views in camera order.
    :raises ValueError: On ``num_views < 1`` or a non-positive resolution.
    """

    if num_views < 1:
        raise ValueError("num_views must be at least 1")
    if resolution[0] <= 0 or resolution[1] <= 0:
        raise ValueError(f"resolution must be positive, got {resolution}")

    if camera_positions is None:
        rng = np.random.default_rng(seed)
        camera_positions = random_camera_positions(num_views, shading.camera_radius, rng)
    camera_positions = np.asarray(camera_positions, dtype=np.float64).reshape(-1, 3)
    if len(camera_positions) != num_views:
        raise ValueError(f"{len(camera_positions)} camera positions for {num_views} views")

    return [
        render_view(mesh, position, resolution=resolution, shading=shading, view_index=index)
        for index, position in enumerate(camera_positions)
    ]
