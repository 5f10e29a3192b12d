"""Annotation set import/export and folder progress tracking.

Four interchange formats:

* ``centroid_abs``  - JSON; centers in absolute world coordinates (the
  cloud's center offset re-added).
* ``centroid_rel``  - same JSON schema; centers in the loaded (centered)
  cloud frame.
* ``vertices``      - JSON; each box as its 8 corners in bbox_corners order.
* ``kitti``         - text; one line per object with the fixed frame map
  (x_cam, y_cam, z_cam) = (-y_w, -z_w, x_w) and ry = -yaw. Yaw-only boxes
  only; roll/pitch raise since the format encodes a single rotation.

Angles are degrees in every file; radians stay internal. Exports are
deterministic byte-for-byte (fixed key order, values rounded at the
configured precision).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from cloudlabel.cloud_io import SUPPORTED_EXTENSIONS
from cloudlabel.errors import (
    AmbiguousVertices,
    IoFailure,
    MalformedLabelFile,
    UnrepresentableRotation,
)
from cloudlabel.geometry import BBox, bbox_corners, euler_angles

LABEL_FORMATS = ("centroid_abs", "centroid_rel", "vertices", "kitti")
DEFAULT_PRECISION = 8

_KITTI_FIELD_COUNT = 15
_KITTI_YAW_ONLY_TOL = 1e-6
_VERTEX_FIT_TOL = 1e-4


@dataclass(frozen=True)
class AnnotationSet:
    """All boxes for one cloud; the unit of export and import."""

    cloud_name: str
    cloud_path: str
    objects: tuple[BBox, ...]

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))


@dataclass(frozen=True)
class ProgressReport:
    total_clouds: int
    labeled_clouds: int

    @property
    def fraction(self) -> float:
        if self.total_clouds == 0:
            return 0.0
        return self.labeled_clouds / self.total_clouds


def label_extension(format: str) -> str:
    return ".txt" if format == "kitti" else ".json"


def category_warnings(aset: AnnotationSet, categories: Iterable[str]) -> list[str]:
    """Names outside the configured category list (warnings, not failures)."""
    known = set(categories)
    return [
        f"object {i}: category {box.category!r} not in configured list"
        for i, box in enumerate(aset.objects)
        if box.category not in known
    ]


# --- export ---------------------------------------------------------------------


def _rounded(value: float, precision: int) -> float:
    rounded = round(float(value), precision)
    return 0.0 if rounded == 0.0 else rounded  # avoid -0.0 in files


def box_to_json(
    box: BBox,
    offset: Sequence[float] = (0.0, 0.0, 0.0),
    precision: int = DEFAULT_PRECISION,
) -> dict:
    cx, cy, cz = (c + o for c, o in zip(box.center, offset))
    roll, pitch, yaw = (math.degrees(a) for a in box.rotations)
    return {
        "name": box.category,
        "centroid": {
            "x": _rounded(cx, precision),
            "y": _rounded(cy, precision),
            "z": _rounded(cz, precision),
        },
        "dimensions": {
            "length": _rounded(box.length, precision),
            "width": _rounded(box.width, precision),
            "height": _rounded(box.height, precision),
        },
        "rotations": {
            "x": _rounded(roll, precision),
            "y": _rounded(pitch, precision),
            "z": _rounded(yaw, precision),
        },
    }


def box_from_json(data: dict, offset: Sequence[float] = (0.0, 0.0, 0.0)) -> BBox:
    """Inverse of :func:`box_to_json`; ``offset`` is subtracted from the centroid."""
    where = f"object {data.get('name', '?')!r}"
    centroid = _require(data, "centroid", where)
    dims = _require(data, "dimensions", where)
    rot = _require(data, "rotations", where)
    try:
        return BBox(
            category=str(_require(data, "name", where)),
            center=(
                float(centroid["x"]) - offset[0],
                float(centroid["y"]) - offset[1],
                float(centroid["z"]) - offset[2],
            ),
            dimensions=(
                float(dims["length"]),
                float(dims["width"]),
                float(dims["height"]),
            ),
            rotations=(
                math.radians(float(rot["x"])),
                math.radians(float(rot["y"])),
                math.radians(float(rot["z"])),
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedLabelFile(f"{where}: {exc}") from exc


def _export_centroid(
    aset: AnnotationSet, precision: int, center_offset, absolute: bool
) -> bytes:
    offset = center_offset if absolute else (0.0, 0.0, 0.0)
    payload = {
        "cloud_name": aset.cloud_name,
        "path": aset.cloud_path,
        "frame": "world_absolute" if absolute else "centered",
        "center_offset": [_rounded(c, precision) for c in center_offset],
        "objects": [box_to_json(box, offset, precision) for box in aset.objects],
    }
    return (json.dumps(payload, indent=2) + "\n").encode()


def _export_vertices(aset: AnnotationSet, precision: int) -> bytes:
    payload = {
        "cloud_name": aset.cloud_name,
        "path": aset.cloud_path,
        "objects": [
            {
                "name": box.category,
                "vertices": [
                    [_rounded(v, precision) for v in corner]
                    for corner in bbox_corners(box)
                ],
            }
            for box in aset.objects
        ],
    }
    return (json.dumps(payload, indent=2) + "\n").encode()


def _export_kitti(aset: AnnotationSet, precision: int) -> bytes:
    lines = []
    for i, box in enumerate(aset.objects):
        roll, pitch, yaw = box.rotations
        if abs(roll) > _KITTI_YAW_ONLY_TOL or abs(pitch) > _KITTI_YAW_ONLY_TOL:
            raise UnrepresentableRotation(
                f"object {i} ({box.category}): roll/pitch ({roll:.3g}, {pitch:.3g}) "
                "cannot be encoded; the format stores yaw only"
            )
        x_w, y_w, z_w = box.center
        cam = (-y_w, -z_w, x_w)
        values = [box.height, box.width, box.length, *cam, -yaw]
        numbers = " ".join(f"{v:.{precision}f}" for v in values)
        lines.append(f"{box.category} 0 0 0 0 0 0 0 {numbers}")
    return ("\n".join(lines) + ("\n" if lines else "")).encode()


def export_labels(
    aset: AnnotationSet,
    format: str,
    precision: int = DEFAULT_PRECISION,
    center_offset: Sequence[float] = (0.0, 0.0, 0.0),
) -> bytes:
    """Serialize an annotation set; ``center_offset`` is the cloud's load shift."""
    offset = tuple(float(c) for c in center_offset)
    if format == "centroid_abs":
        return _export_centroid(aset, precision, offset, absolute=True)
    if format == "centroid_rel":
        return _export_centroid(aset, precision, offset, absolute=False)
    if format == "vertices":
        return _export_vertices(aset, precision)
    if format == "kitti":
        return _export_kitti(aset, precision)
    raise ValueError(f"unknown label format {format!r}; expected {LABEL_FORMATS}")


# --- import ---------------------------------------------------------------------


def _require(payload: dict, key: str, where: str):
    if key not in payload:
        raise MalformedLabelFile(f"{where}: missing key {key!r}")
    return payload[key]


def _import_centroid(data: bytes, center_offset, absolute: bool) -> AnnotationSet:
    try:
        payload = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedLabelFile(f"not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise MalformedLabelFile("top level must be an object")
    offset = payload.get("center_offset", list(center_offset))
    if absolute:
        offset = [float(c) for c in offset]
    else:
        offset = [0.0, 0.0, 0.0]
    boxes = []
    for i, obj in enumerate(_require(payload, "objects", "labels")):
        if not isinstance(obj, dict):
            raise MalformedLabelFile(f"objects[{i}]: expected an object")
        boxes.append(box_from_json(obj, offset))
    return AnnotationSet(
        cloud_name=str(payload.get("cloud_name", "")),
        cloud_path=str(payload.get("path", "")),
        objects=tuple(boxes),
    )


# Corner-index pairs that differ only in one local axis bit.
_AXIS_PAIRS = {
    0: ((0, 1), (2, 3), (4, 5), (6, 7)),
    1: ((0, 2), (1, 3), (4, 6), (5, 7)),
    2: ((0, 4), (1, 5), (2, 6), (3, 7)),
}


def box_from_corners(
    name: str, corners: np.ndarray, tolerance: float = _VERTEX_FIT_TOL
) -> BBox:
    """Recover the 10 parameters from 8 corners in bbox_corners order.

    The rotation comes from a least-squares orthonormal fit (SVD) of the edge
    directions; corners that deviate from the reconstructed box by more than
    ``tolerance`` raise :class:`AmbiguousVertices`.
    """
    corners = np.asarray(corners, dtype=np.float64)
    if corners.shape != (8, 3):
        raise MalformedLabelFile(f"expected 8 corners, got shape {corners.shape}")
    center = corners.mean(axis=0)
    axes = []
    dims = []
    for axis in range(3):
        edges = np.stack([corners[j] - corners[i] for i, j in _AXIS_PAIRS[axis]])
        mean_edge = edges.mean(axis=0)
        dims.append(float(np.linalg.norm(mean_edge)))
        axes.append(mean_edge)
    if min(dims) <= 1e-12:
        raise AmbiguousVertices(f"{name}: degenerate corner set (zero extent)")
    m = np.stack([a / d for a, d in zip(axes, dims)], axis=1)
    u, _, vt = np.linalg.svd(m)
    rot = u @ vt
    if np.linalg.det(rot) < 0:
        u[:, -1] = -u[:, -1]
        rot = u @ vt
    box = BBox(
        category=name,
        center=tuple(center),
        dimensions=tuple(dims),
        rotations=euler_angles(rot),
    )
    residual = float(np.abs(bbox_corners(box) - corners).max())
    if residual > tolerance:
        raise AmbiguousVertices(
            f"{name}: corners deviate from a box by {residual:.2e} (> {tolerance:g})"
        )
    return box


def _import_vertices(data: bytes) -> AnnotationSet:
    try:
        payload = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedLabelFile(f"not valid JSON: {exc}") from exc
    boxes = []
    for i, obj in enumerate(_require(payload, "objects", "labels")):
        where = f"objects[{i}]"
        corners = np.asarray(_require(obj, "vertices", where), dtype=np.float64)
        boxes.append(box_from_corners(str(_require(obj, "name", where)), corners))
    return AnnotationSet(
        cloud_name=str(payload.get("cloud_name", "")),
        cloud_path=str(payload.get("path", "")),
        objects=tuple(boxes),
    )


def _import_kitti(data: bytes) -> AnnotationSet:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedLabelFile(f"not valid text: {exc}") from exc
    boxes = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != _KITTI_FIELD_COUNT:
            raise MalformedLabelFile(
                f"line {lineno}: {len(parts)} fields, expected {_KITTI_FIELD_COUNT}"
            )
        try:
            h, w, l = (float(v) for v in parts[8:11])
            x_c, y_c, z_c = (float(v) for v in parts[11:14])
            ry = float(parts[14])
        except ValueError as exc:
            raise MalformedLabelFile(f"line {lineno}: {exc}") from exc
        boxes.append(
            BBox(
                category=parts[0],
                center=(z_c, -x_c, -y_c),
                dimensions=(l, w, h),
                rotations=(0.0, 0.0, -ry),
            )
        )
    return AnnotationSet(cloud_name="", cloud_path="", objects=tuple(boxes))


def import_labels(
    data: bytes,
    format: str,
    center_offset: Sequence[float] = (0.0, 0.0, 0.0),
) -> AnnotationSet:
    """Inverse of :func:`export_labels` on its image."""
    if format == "centroid_abs":
        return _import_centroid(data, center_offset, absolute=True)
    if format == "centroid_rel":
        return _import_centroid(data, center_offset, absolute=False)
    if format == "vertices":
        return _import_vertices(data)
    if format == "kitti":
        return _import_kitti(data)
    raise ValueError(f"unknown label format {format!r}; expected {LABEL_FORMATS}")


# --- files and progress -----------------------------------------------------------


def write_labels(
    aset: AnnotationSet,
    path,
    format: str,
    precision: int = DEFAULT_PRECISION,
    center_offset: Sequence[float] = (0.0, 0.0, 0.0),
) -> None:
    """Atomic write (temp file + rename) so readers never see partial labels."""
    path = Path(path)
    payload = export_labels(aset, format, precision, center_offset)
    tmp = path.with_name(path.name + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_bytes(payload)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write labels {path}: {exc}") from exc


def read_labels(
    path, format: str, center_offset: Sequence[float] = (0.0, 0.0, 0.0)
) -> AnnotationSet:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read labels {path}: {exc}") from exc
    return import_labels(data, format, center_offset)


def list_clouds(folder) -> list[Path]:
    folder = Path(folder)
    if not folder.is_dir():
        raise IoFailure(f"cloud folder {folder} does not exist")
    return sorted(
        p for p in folder.iterdir()
        if p.is_file() and p.suffix.lower() in SUPPORTED_EXTENSIONS
    )


def is_labeled(cloud_path, label_folder) -> bool:
    """A cloud counts as labeled iff a non-empty label file shares its stem."""
    stem = Path(cloud_path).stem
    for ext in (".json", ".txt"):
        candidate = Path(label_folder) / (stem + ext)
        try:
            if candidate.is_file() and candidate.stat().st_size > 0:
                return True
        except OSError:
            continue
    return False


def scan_progress(folder, label_folder) -> ProgressReport:
    """Count clouds in ``folder`` and how many have non-empty labels."""
    label_folder = Path(label_folder)
    if not label_folder.is_dir():
        raise IoFailure(f"label folder {label_folder} does not exist")
    clouds = list_clouds(folder)
    labeled = sum(1 for c in clouds if is_labeled(c, label_folder))
    return ProgressReport(total_clouds=len(clouds), labeled_clouds=labeled)
