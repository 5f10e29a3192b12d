"""Camera model, perspective projection, navigation, and depth rasterization.

The camera orbits a target point (spherical pose) in a right-handed, z-up
world. Normalized depth runs near -> 0, far -> 1 through the perspective
divide; the depth-buffer background is exactly 1.0. The rasterizer is a
deterministic software twin of a GPU point pass, used for headless selection
and trace replay: point data is converted once per cloud, per-frame work
touches only the matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional, Sequence, Union

import numpy as np

from cloudlabel.errors import BackgroundDepth
from cloudlabel.geometry import normalize_angle

ELEVATION_EPS = 1e-3
ORBIT_RATE = 0.01  # radians per pixel of drag
DEFAULT_FOV_Y = math.radians(45.0)
DEFAULT_NEAR = 0.01
DEFAULT_FAR = 300.0
DEFAULT_POINT_SIZE = 4
DEFAULT_ZOOM_BASE = 0.9

_WORLD_UP = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class Camera:
    """Immutable orbit-camera snapshot.

    Construction clamps elevation into [-pi/2 + eps, pi/2 - eps] and distance
    to at least ``near``; structurally impossible parameters raise.
    """

    orbit_target: tuple[float, float, float] = (0.0, 0.0, 0.0)
    distance: float = 5.0
    azimuth: float = 0.0
    elevation: float = 0.0
    fov_y: float = DEFAULT_FOV_Y
    near: float = DEFAULT_NEAR
    far: float = DEFAULT_FAR
    viewport: tuple[int, int] = (640, 480)

    def __post_init__(self):
        if not (0.0 < self.fov_y < math.pi):
            raise ValueError(f"fov_y must be in (0, pi), got {self.fov_y}")
        if not (0.0 < self.near < self.far):
            raise ValueError(f"need 0 < near < far, got {self.near}, {self.far}")
        width, height = self.viewport
        if int(width) < 1 or int(height) < 1:
            raise ValueError(f"viewport must be positive, got {self.viewport}")
        object.__setattr__(self, "viewport", (int(width), int(height)))
        object.__setattr__(
            self, "orbit_target", tuple(float(c) for c in self.orbit_target)
        )
        limit = math.pi / 2 - ELEVATION_EPS
        object.__setattr__(
            self, "elevation", min(limit, max(-limit, float(self.elevation)))
        )
        object.__setattr__(self, "azimuth", normalize_angle(float(self.azimuth)))
        object.__setattr__(self, "distance", max(float(self.distance), self.near))

    @property
    def width(self) -> int:
        return self.viewport[0]

    @property
    def height(self) -> int:
        return self.viewport[1]

    def eye(self) -> np.ndarray:
        ce = math.cos(self.elevation)
        direction = np.array(
            [
                ce * math.cos(self.azimuth),
                ce * math.sin(self.azimuth),
                math.sin(self.elevation),
            ]
        )
        return np.asarray(self.orbit_target) + self.distance * direction

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """View-space basis (right, up, forward) in world coordinates."""
        eye = self.eye()
        forward = np.asarray(self.orbit_target) - eye
        forward /= np.linalg.norm(forward)
        right = np.cross(forward, _WORLD_UP)
        right /= np.linalg.norm(right)
        up = np.cross(right, forward)
        return right, up, forward


# Cameras are immutable and hashable, so derived matrices are cached; the
# returned arrays are read-only because they are shared.
@lru_cache(maxsize=256)
def view_matrix(camera: Camera) -> np.ndarray:
    eye = camera.eye()
    right, up, forward = camera.basis()
    mat = np.eye(4)
    mat[0, :3], mat[0, 3] = right, -right @ eye
    mat[1, :3], mat[1, 3] = up, -up @ eye
    mat[2, :3], mat[2, 3] = -forward, forward @ eye
    mat.flags.writeable = False
    return mat


@lru_cache(maxsize=256)
def projection_matrix(camera: Camera) -> np.ndarray:
    t = 1.0 / math.tan(camera.fov_y / 2.0)
    aspect = camera.width / camera.height
    near, far = camera.near, camera.far
    mat = np.zeros((4, 4))
    mat[0, 0] = t / aspect
    mat[1, 1] = t
    mat[2, 2] = -(far + near) / (far - near)
    mat[2, 3] = -2.0 * far * near / (far - near)
    mat[3, 2] = -1.0
    mat.flags.writeable = False
    return mat


@lru_cache(maxsize=256)
def view_projection(camera: Camera) -> np.ndarray:
    mat = projection_matrix(camera) @ view_matrix(camera)
    mat.flags.writeable = False
    return mat


@lru_cache(maxsize=256)
def _inverse_view_projection(camera: Camera) -> np.ndarray:
    mat = np.linalg.inv(view_projection(camera))
    mat.flags.writeable = False
    return mat


def project(
    camera: Camera, point: Sequence[float]
) -> Optional[tuple[float, float, float]]:
    """Project a world point to (px, py, depth); pixel origin is top-left.

    Returns None for points at or behind the near plane. Laterally
    out-of-viewport points still project (coordinates fall outside the
    viewport); callers filter as needed.
    """
    v = view_matrix(camera) @ np.append(np.asarray(point, dtype=float), 1.0)
    if v[2] >= -camera.near:
        return None
    clip = projection_matrix(camera) @ v
    ndc = clip[:3] / clip[3]
    px = (ndc[0] + 1.0) / 2.0 * camera.width
    py = (1.0 - ndc[1]) / 2.0 * camera.height
    depth = (ndc[2] + 1.0) / 2.0
    return float(px), float(py), float(depth)


def unproject(camera: Camera, px: float, py: float, depth: float) -> np.ndarray:
    """Exact inverse of :func:`project` for in-frustum inputs."""
    if depth >= 1.0 - 1e-9:
        raise BackgroundDepth(f"depth {depth} is background")
    ndc = np.array(
        [
            2.0 * px / camera.width - 1.0,
            1.0 - 2.0 * py / camera.height,
            2.0 * depth - 1.0,
            1.0,
        ]
    )
    world = _inverse_view_projection(camera) @ ndc
    return world[:3] / world[3]


# --- navigation ---------------------------------------------------------------


@dataclass(frozen=True)
class Orbit:
    dx: float
    dy: float


@dataclass(frozen=True)
class Pan:
    dx: float
    dy: float


@dataclass(frozen=True)
class Zoom:
    delta: float


NavigationEvent = Union[Orbit, Pan, Zoom]


def navigate(
    camera: Camera,
    event: NavigationEvent,
    zoom_base: float = DEFAULT_ZOOM_BASE,
    orbit_rate: float = ORBIT_RATE,
) -> Camera:
    """Apply one mouse navigation event; invariants are re-clamped.

    Orbit maps pixel drag to azimuth/elevation; pan translates the orbit
    target in the view plane (grab-the-world direction); zoom scales the
    distance by ``zoom_base ** delta``.
    """
    if isinstance(event, Orbit):
        return replace(
            camera,
            azimuth=camera.azimuth + event.dx * orbit_rate,
            elevation=camera.elevation - event.dy * orbit_rate,
        )
    if isinstance(event, Pan):
        right, up, _ = camera.basis()
        per_pixel = 2.0 * camera.distance * math.tan(camera.fov_y / 2.0) / camera.height
        shift = (-event.dx * right + event.dy * up) * per_pixel
        target = tuple(np.asarray(camera.orbit_target) + shift)
        return replace(camera, orbit_target=target)
    if isinstance(event, Zoom):
        return replace(camera, distance=camera.distance * zoom_base**event.delta)
    raise TypeError(f"unsupported navigation event {event!r}")


# --- depth buffer and rasterizer ------------------------------------------------


@dataclass(frozen=True)
class DepthBuffer:
    """Per-pixel normalized depth; 1.0 is background (nothing rendered)."""

    depths: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.depths, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"depths must be 2-D, got shape {arr.shape}")
        if arr.size and (float(arr.min()) < 0.0 or float(arr.max()) > 1.0):
            raise ValueError("depth values must lie in [0, 1]")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "depths", arr)

    @property
    def width(self) -> int:
        return self.depths.shape[1]

    @property
    def height(self) -> int:
        return self.depths.shape[0]

    def to_pgm(self) -> bytes:
        """16-bit binary PGM (depth scaled by 65535), for debugging."""
        header = f"P5\n{self.width} {self.height}\n65535\n".encode()
        body = np.round(self.depths * 65535.0).astype(">u2").tobytes()
        return header + body


class Rasterizer:
    """Splats cloud points into depth buffers for any number of cameras.

    The point array is converted to homogeneous form exactly once, mirroring
    a one-time GPU upload; ``uploads`` counts conversions so tests can pin
    the once-per-cloud contract.
    """

    def __init__(self, cloud):
        points = cloud if isinstance(cloud, np.ndarray) else cloud.points
        points = np.asarray(points, dtype=np.float64)
        self._homogeneous = np.hstack([points, np.ones((len(points), 1))])
        self.uploads = 1

    def depth_buffer(
        self, camera: Camera, point_size_px: int = DEFAULT_POINT_SIZE
    ) -> DepthBuffer:
        if point_size_px < 1:
            raise ValueError(f"point_size_px must be >= 1, got {point_size_px}")
        width, height = camera.viewport
        buf = np.ones((height, width))
        clip = self._homogeneous @ view_projection(camera).T
        w = clip[:, 3]
        in_front = w > 1e-12
        if np.any(in_front):
            ndc = clip[in_front, :3] / w[in_front, None]
            depth = (ndc[:, 2] + 1.0) / 2.0
            fx = (ndc[:, 0] + 1.0) / 2.0 * width
            fy = (1.0 - ndc[:, 1]) / 2.0 * height
            margin = float(point_size_px + 1)
            visible = (
                (depth >= 0.0)
                & (depth < 1.0)
                & (fx > -margin)
                & (fx < width + margin)
                & (fy > -margin)
                & (fy < height + margin)
            )
            depth = depth[visible]
            px = np.floor(fx[visible]).astype(np.int64)
            py = np.floor(fy[visible]).astype(np.int64)
            half = point_size_px // 2
            for dy in range(-half, point_size_px - half):
                for dx in range(-half, point_size_px - half):
                    x = px + dx
                    y = py + dy
                    mask = (x >= 0) & (x < width) & (y >= 0) & (y < height)
                    np.minimum.at(buf, (y[mask], x[mask]), depth[mask])
        return DepthBuffer(buf)


def rasterize_depth(
    cloud, camera: Camera, point_size_px: int = DEFAULT_POINT_SIZE
) -> DepthBuffer:
    """One-shot rasterization; reuse a :class:`Rasterizer` across frames."""
    return Rasterizer(cloud).depth_buffer(camera, point_size_px)


# --- boundary serialization (degrees in, radians inside) -------------------------


def camera_to_dict(camera: Camera) -> dict:
    return {
        "target": list(camera.orbit_target),
        "distance": camera.distance,
        "azimuth_deg": math.degrees(camera.azimuth),
        "elevation_deg": math.degrees(camera.elevation),
        "fov_deg": math.degrees(camera.fov_y),
        "near": camera.near,
        "far": camera.far,
        "viewport": list(camera.viewport),
    }


def camera_from_dict(data: dict) -> Camera:
    return Camera(
        orbit_target=tuple(data.get("target", (0.0, 0.0, 0.0))),
        distance=float(data.get("distance", 5.0)),
        azimuth=math.radians(float(data.get("azimuth_deg", 0.0))),
        elevation=math.radians(float(data.get("elevation_deg", 0.0))),
        fov_y=math.radians(float(data.get("fov_deg", 45.0))),
        near=float(data.get("near", DEFAULT_NEAR)),
        far=float(data.get("far", DEFAULT_FAR)),
        viewport=tuple(data.get("viewport", (640, 480))),
    )
