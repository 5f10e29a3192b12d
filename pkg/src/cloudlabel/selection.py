"""Turn a 2D click plus a depth buffer into a 3D world point.

Two heuristics encode the user intent assumptions (a click always means a
point, and the nearest surface is the likely target):

* depth minimization: the click landed on a rendered point, so take the
  minimum depth within a small radius to land on the object's near surface;
* depth smoothing: the click missed (background pixel), so snap to the mean
  of all non-background depths within a larger radius.

Minimization deliberately uses a smaller radius than smoothing so a direct
hit is never yanked far away.

Note the background threshold interacts with the camera's depth range:
normalized depth is nonlinear, so with the default near/far (0.01/300 m)
points farther than roughly 9.7 m from the eye already exceed the default
0.999 threshold and read as background. Sessions annotating distant content
should raise the threshold toward 1 or tighten the far plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from cloudlabel.errors import NoPointNearClick
from cloudlabel.viewpoint import Camera, DepthBuffer, unproject

DEFAULT_SMOOTHING_RADIUS = 10
DEFAULT_MINIMIZATION_RADIUS = 4
DEFAULT_BACKGROUND_THRESHOLD = 0.999


@dataclass(frozen=True)
class SelectionParams:
    smoothing_radius_px: int = DEFAULT_SMOOTHING_RADIUS
    minimization_radius_px: int = DEFAULT_MINIMIZATION_RADIUS
    background_threshold: float = DEFAULT_BACKGROUND_THRESHOLD

    def __post_init__(self):
        if self.minimization_radius_px < 1 or self.smoothing_radius_px < 1:
            raise ValueError("selection radii must be >= 1")
        if self.minimization_radius_px >= self.smoothing_radius_px:
            raise ValueError(
                "minimization radius must be smaller than smoothing radius"
            )
        if not (0.0 < self.background_threshold <= 1.0):
            raise ValueError("background_threshold must be in (0, 1]")


def _disk_values(buf: DepthBuffer, cx: int, cy: int, radius: int) -> np.ndarray:
    """Non-background depths within Euclidean pixel distance <= radius."""
    y0, y1 = max(cy - radius, 0), min(cy + radius + 1, buf.height)
    x0, x1 = max(cx - radius, 0), min(cx + radius + 1, buf.width)
    window = buf.depths[y0:y1, x0:x1]
    ys, xs = np.mgrid[y0:y1, x0:x1]
    in_disk = (xs - cx) ** 2 + (ys - cy) ** 2 <= radius * radius
    return window[in_disk]


def select_depth(buf: DepthBuffer, cx: int, cy: int, params: SelectionParams) -> float:
    """Selected depth for a click at pixel (cx, cy); always < background."""
    cx, cy = int(math.floor(cx)), int(math.floor(cy))
    if not (0 <= cx < buf.width and 0 <= cy < buf.height):
        raise ValueError(f"click ({cx}, {cy}) outside {buf.width}x{buf.height} buffer")
    threshold = params.background_threshold
    clicked = float(buf.depths[cy, cx])
    if clicked < threshold:
        values = _disk_values(buf, cx, cy, params.minimization_radius_px)
        hits = values[values < threshold]
        return float(hits.min())
    values = _disk_values(buf, cx, cy, params.smoothing_radius_px)
    hits = values[values < threshold]
    if hits.size == 0:
        raise NoPointNearClick(
            f"no point within {params.smoothing_radius_px} px of ({cx}, {cy})"
        )
    return float(hits.mean())


def select_world_point(
    camera: Camera, buf: DepthBuffer, cx: float, cy: float, params: SelectionParams
) -> np.ndarray:
    """Unproject the click: the pixel supplies (x, y), the heuristic the depth."""
    depth = select_depth(buf, int(math.floor(cx)), int(math.floor(cy)), params)
    return unproject(camera, cx, cy, depth)


def select_world_point_from_patch(
    camera: Camera,
    px: float,
    py: float,
    patch: np.ndarray,
    params: SelectionParams,
) -> np.ndarray:
    """Selection over a square depth patch centered on the click pixel.

    This is the session-protocol entry point: a UI reads back only the
    neighborhood around the click ((2r+1) squared values, row-major) and the
    core owns the heuristic. ``px``/``py`` stay in full-viewport coordinates
    for the unprojection.
    """
    patch = np.asarray(patch, dtype=np.float64)
    if patch.ndim != 2 or patch.shape[0] != patch.shape[1] or patch.shape[0] % 2 != 1:
        raise ValueError(f"patch must be an odd square, got shape {patch.shape}")
    radius = (patch.shape[0] - 1) // 2
    depth = select_depth(DepthBuffer(patch), radius, radius, params)
    return unproject(camera, px, py, depth)
