"""Oriented bounding-box math: construction, transforms, containment, IoU.

A box is ten parameters: category plus center (x, y, z), dimensions
(length, width, height) and rotations (roll, pitch, yaw). Rotation order is
fixed as Rz(yaw) @ Ry(pitch) @ Rx(roll) about fixed world axes, right-handed,
z up. All functions are pure; mutations return new values.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence, Union

import numpy as np

Vec3 = tuple[float, float, float]

#: Smallest permitted box dimension in meters; scale/pull operations clamp here.
MIN_DIMENSION = 0.01

_AXIS_INDEX = {"x": 0, "y": 1, "z": 2}
_DIM_INDEX = {"length": 0, "width": 1, "height": 2}


def normalize_angle(angle: float) -> float:
    """Wrap an angle in radians into (-pi, pi]."""
    a = math.fmod(angle + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


def rotation_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Rz(yaw) @ Ry(pitch) @ Rx(roll) for fixed world axes."""
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


def euler_angles(rot: np.ndarray) -> Vec3:
    """Invert :func:`rotation_matrix`.

    Returns the canonical (roll, pitch, yaw) with pitch in [-pi/2, pi/2].
    At gimbal lock (|pitch| = pi/2) roll is folded into yaw and reported as 0.
    """
    sp = max(-1.0, min(1.0, -float(rot[2, 0])))
    pitch = math.asin(sp)
    if abs(sp) < 1.0 - 1e-12:
        roll = math.atan2(rot[2, 1], rot[2, 2])
        yaw = math.atan2(rot[1, 0], rot[0, 0])
    else:
        roll = 0.0
        yaw = math.atan2(-rot[0, 1], rot[1, 1])
    return (normalize_angle(roll), normalize_angle(pitch), normalize_angle(yaw))


def _axis_rotation(axis: str, angle: float) -> np.ndarray:
    if axis == "x":
        return rotation_matrix(angle, 0.0, 0.0)
    if axis == "y":
        return rotation_matrix(0.0, angle, 0.0)
    if axis == "z":
        return rotation_matrix(0.0, 0.0, angle)
    raise ValueError(f"unknown axis {axis!r}")


def _vec3(value: Iterable[float], name: str) -> Vec3:
    v = tuple(float(c) for c in value)
    if len(v) != 3:
        raise ValueError(f"{name} must have 3 components, got {len(v)}")
    if not all(math.isfinite(c) for c in v):
        raise ValueError(f"{name} must be finite, got {v}")
    return v


class Face(enum.Enum):
    """One box face, named in the box local frame.

    FRONT/BACK sit on +/- length (local x), RIGHT/LEFT on +/- width (local y),
    TOP/BOTTOM on +/- height (local z).
    """

    FRONT = ("x", 0, +1.0)
    BACK = ("x", 0, -1.0)
    RIGHT = ("y", 1, +1.0)
    LEFT = ("y", 1, -1.0)
    TOP = ("z", 2, +1.0)
    BOTTOM = ("z", 2, -1.0)

    def __init__(self, axis_name: str, axis: int, sign: float):
        self.axis_name = axis_name
        self.axis = axis
        self.sign = sign

    @property
    def local_normal(self) -> np.ndarray:
        n = np.zeros(3)
        n[self.axis] = self.sign
        return n


@dataclass(frozen=True)
class BBox:
    """A 10-parameter box label: category + center + dimensions + rotations.

    Rotations are stored in radians and re-normalized into (-pi, pi] on
    construction. Dimensions must be positive; operations that shrink a box
    clamp at a configured minimum instead of going below it.
    """

    category: str
    center: Vec3
    dimensions: Vec3
    rotations: Vec3 = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center, "center"))
        dims = _vec3(self.dimensions, "dimensions")
        if min(dims) <= 0.0:
            raise ValueError(f"dimensions must be positive, got {dims}")
        object.__setattr__(self, "dimensions", dims)
        rot = _vec3(self.rotations, "rotations")
        object.__setattr__(
            self, "rotations", tuple(normalize_angle(a) for a in rot)
        )

    @property
    def length(self) -> float:
        return self.dimensions[0]

    @property
    def width(self) -> float:
        return self.dimensions[1]

    @property
    def height(self) -> float:
        return self.dimensions[2]

    def rotation(self) -> np.ndarray:
        return rotation_matrix(*self.rotations)


def bbox_corners(box: BBox) -> np.ndarray:
    """The 8 corners as an (8, 3) array in a fixed order.

    Corner index bits select the local half-axis: bit0 set = +x (length),
    bit1 = +y (width), bit2 = +z (height); e.g. corner 0 is the local
    (-l/2, -w/2, -h/2) corner, corner 7 the (+l/2, +w/2, +h/2) one.
    """
    half = np.asarray(box.dimensions) / 2.0
    signs = np.array(
        [[1.0 if i & bit else -1.0 for bit in (1, 2, 4)] for i in range(8)]
    )
    local = signs * half
    return np.asarray(box.center) + local @ box.rotation().T


def contains_point(box: BBox, point: Sequence[float], atol: float = 1e-9) -> bool:
    """True iff the point lies in the closed box, with ``atol`` numeric slack."""
    local = box.rotation().T @ (np.asarray(point, dtype=float) - np.asarray(box.center))
    half = np.asarray(box.dimensions) / 2.0
    return bool(np.all(np.abs(local) <= half + atol))


def bbox_volume(box: BBox) -> float:
    l, w, h = box.dimensions
    return l * w * h


# --- stepwise transforms -----------------------------------------------------


@dataclass(frozen=True)
class Translate:
    delta: Vec3


@dataclass(frozen=True)
class Rotate:
    """World-axis rotation by ``angle`` radians about the box center."""

    axis: str
    angle: float


@dataclass(frozen=True)
class Scale:
    """Grow/shrink one dimension by ``delta`` meters, symmetric about center."""

    axis: str
    delta: float


TransformOp = Union[Translate, Rotate, Scale]


class TransformResult(NamedTuple):
    box: BBox
    clamped: bool


def transform_bbox(
    box: BBox, op: TransformOp, min_dimension: float = MIN_DIMENSION
) -> TransformResult:
    """Apply one correction step and report whether clamping occurred."""
    if isinstance(op, Translate):
        delta = _vec3(op.delta, "delta")
        center = tuple(c + d for c, d in zip(box.center, delta))
        return TransformResult(
            BBox(box.category, center, box.dimensions, box.rotations), False
        )
    if isinstance(op, Rotate):
        if op.axis not in _AXIS_INDEX:
            raise ValueError(f"unknown rotation axis {op.axis!r}")
        rot = _axis_rotation(op.axis, op.angle) @ box.rotation()
        return TransformResult(
            BBox(box.category, box.center, box.dimensions, euler_angles(rot)), False
        )
    if isinstance(op, Scale):
        if op.axis not in _DIM_INDEX:
            raise ValueError(f"unknown dimension axis {op.axis!r}")
        idx = _DIM_INDEX[op.axis]
        dims = list(box.dimensions)
        grown = dims[idx] + op.delta
        clamped = grown < min_dimension
        dims[idx] = max(grown, min_dimension)
        return TransformResult(
            BBox(box.category, box.center, tuple(dims), box.rotations), clamped
        )
    raise TypeError(f"unsupported transform op {op!r}")


def face_pull(
    box: BBox, face: Face, delta: float, min_dimension: float = MIN_DIMENSION
) -> TransformResult:
    """Move one face by ``delta`` along its outward normal, opposite face fixed.

    The perpendicular dimension grows by the applied delta and the center
    shifts by half of it along the face's world normal. Shrinking below
    ``min_dimension`` clamps the dimension, with the center adjusted to match
    the clamped movement.
    """
    dims = list(box.dimensions)
    new_dim = max(dims[face.axis] + delta, min_dimension)
    clamped = new_dim != dims[face.axis] + delta
    applied = new_dim - dims[face.axis]
    dims[face.axis] = new_dim
    world_normal = box.rotation() @ face.local_normal
    center = tuple(
        c + (applied / 2.0) * n for c, n in zip(box.center, world_normal)
    )
    return TransformResult(
        BBox(box.category, center, tuple(dims), box.rotations), clamped
    )


# --- exact 3D IoU via half-space clipping ------------------------------------

# Face index quads over the bbox_corners bit pattern, cyclic order per face.
_FACE_QUADS = (
    (0, 2, 6, 4),  # -x
    (1, 3, 7, 5),  # +x
    (0, 1, 5, 4),  # -y
    (2, 3, 7, 6),  # +y
    (0, 1, 3, 2),  # -z
    (4, 5, 7, 6),  # +z
)

_CLIP_EPS = 1e-12


def _box_halfspaces(box: BBox):
    """The six (normal, offset) pairs with n . x <= d describing the inside."""
    rot = box.rotation()
    center = np.asarray(box.center)
    half = np.asarray(box.dimensions) / 2.0
    planes = []
    for axis in range(3):
        n = rot[:, axis]
        base = float(n @ center)
        planes.append((n, base + half[axis]))
        planes.append((-n, -base + half[axis]))
    return planes


def _clip_polygon(poly: np.ndarray, normal: np.ndarray, offset: float):
    """Sutherland-Hodgman clip of one polygon; returns (kept poly, cut points)."""
    dist = poly @ normal - offset
    eps = _CLIP_EPS * (1.0 + abs(offset))
    inside = dist <= eps
    kept, cuts = [], []
    count = len(poly)
    for i in range(count):
        j = (i + 1) % count
        if inside[i]:
            kept.append(poly[i])
        if inside[i] != inside[j]:
            t = dist[i] / (dist[i] - dist[j])
            crossing = poly[i] + t * (poly[j] - poly[i])
            kept.append(crossing)
            cuts.append(crossing)
    return kept, cuts


def _cap_polygon(points: list[np.ndarray], normal: np.ndarray) -> np.ndarray:
    """Order the section points of one clip plane into a convex polygon."""
    pts = np.unique(np.round(np.asarray(points), 9), axis=0)
    centroid = pts.mean(axis=0)
    # Basis in the cut plane.
    helper = np.array([1.0, 0.0, 0.0])
    if abs(normal[0]) > 0.9:
        helper = np.array([0.0, 1.0, 0.0])
    u = np.cross(normal, helper)
    u /= np.linalg.norm(u)
    v = np.cross(normal, u)
    rel = pts - centroid
    order = np.argsort(np.arctan2(rel @ v, rel @ u))
    return pts[order]


def _clip_polyhedron(faces: list[np.ndarray], normal: np.ndarray, offset: float):
    new_faces, section = [], []
    for poly in faces:
        kept, cuts = _clip_polygon(poly, normal, offset)
        if len(kept) >= 3:
            new_faces.append(np.asarray(kept))
        section.extend(cuts)
    if len(section) >= 3:
        cap = _cap_polygon(section, normal)
        if len(cap) >= 3:
            new_faces.append(cap)
    return new_faces


def _polyhedron_volume(faces: list[np.ndarray]) -> float:
    """Volume by fanning every face into tetrahedra from the vertex centroid."""
    apex = np.vstack(faces).mean(axis=0)
    volume = 0.0
    for poly in faces:
        rel = poly - apex
        for i in range(1, len(poly) - 1):
            volume += abs(float(np.dot(rel[0], np.cross(rel[i], rel[i + 1]))))
    return volume / 6.0


def iou_3d(a: BBox, b: BBox) -> float:
    """Exact volumetric intersection-over-union of two oriented boxes.

    Box a's polytope is clipped against box b's six half-spaces; the
    intersection volume comes from tetrahedral decomposition of the clipped
    polytope. Disjoint boxes give exactly 0.0, identical ones exactly 1.0.
    """
    if (
        a.center == b.center
        and a.dimensions == b.dimensions
        and np.allclose(a.rotation(), b.rotation(), rtol=0.0, atol=1e-12)
    ):
        return 1.0

    # Bounding-sphere reject: cheap and makes disjoint pairs exactly 0.
    half_diag_a = float(np.linalg.norm(a.dimensions)) / 2.0
    half_diag_b = float(np.linalg.norm(b.dimensions)) / 2.0
    center_gap = float(
        np.linalg.norm(np.asarray(a.center) - np.asarray(b.center))
    )
    if center_gap > half_diag_a + half_diag_b:
        return 0.0

    corners = bbox_corners(a)
    faces = [corners[list(quad)] for quad in _FACE_QUADS]
    for normal, offset in _box_halfspaces(b):
        faces = _clip_polyhedron(faces, normal, offset)
        if not faces:
            return 0.0

    vol_a = bbox_volume(a)
    vol_b = bbox_volume(b)
    vol_int = min(_polyhedron_volume(faces), vol_a, vol_b)
    union = vol_a + vol_b - vol_int
    if union <= 0.0 or vol_int <= 0.0:
        return 0.0
    return min(vol_int / union, 1.0)
