"""Point-cloud file I/O: format detection, parsing, serialization, alignment.

Seven input formats are supported (.bin, .pcd, .ply, .pts, .xyz, .xyzn,
.xyzrgb); ascii and binary variants of PCD/PLY count as one format each.
Clouds are centered at load (centroid to origin) with the translation kept in
``center_offset`` so exports can restore absolute coordinates. A floor
alignment, once computed, is persisted next to the source file in a
``<cloud>.lcmeta.json`` sidecar and re-applied on the next load.
"""

from __future__ import annotations

import enum
import io
import json
import os
import threading
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from cloudlabel.errors import (
    DegeneratePlane,
    InconsistentCounts,
    IoFailure,
    LossyWriteWarning,
    MalformedFile,
    MalformedHeader,
    UnsupportedFormat,
)

SIDECAR_SUFFIX = ".lcmeta.json"

_sidecar_locks: dict[str, threading.Lock] = {}
_sidecar_locks_guard = threading.Lock()


class FormatTag(enum.Enum):
    BIN = "bin"
    PCD_ASCII = "pcd_ascii"
    PCD_BINARY = "pcd_binary"
    PLY_ASCII = "ply_ascii"
    PLY_BINARY = "ply_binary"
    XYZ = "xyz"
    XYZN = "xyzn"
    XYZRGB = "xyzrgb"
    PTS = "pts"

    @property
    def extension(self) -> str:
        return "." + self.value.split("_")[0]

    @property
    def supports_colors(self) -> bool:
        return self in _COLOR_FORMATS

    @property
    def supports_intensities(self) -> bool:
        return self in _INTENSITY_FORMATS


_COLOR_FORMATS = frozenset(
    {
        FormatTag.PCD_ASCII,
        FormatTag.PCD_BINARY,
        FormatTag.PLY_ASCII,
        FormatTag.PLY_BINARY,
        FormatTag.XYZRGB,
        FormatTag.PTS,
    }
)
_INTENSITY_FORMATS = frozenset(
    {
        FormatTag.BIN,
        FormatTag.PCD_ASCII,
        FormatTag.PCD_BINARY,
        FormatTag.PLY_ASCII,
        FormatTag.PLY_BINARY,
        FormatTag.PTS,
    }
)


@dataclass(frozen=True)
class PointCloud:
    """An immutable point set with optional color/intensity channels.

    ``points`` are float64 world-frame meters, centered so the centroid sits
    at the origin; ``center_offset`` is the translation that was removed.
    """

    points: np.ndarray
    colors: Optional[np.ndarray] = None
    intensities: Optional[np.ndarray] = None
    source_path: str = ""
    format: Optional[FormatTag] = None
    center_offset: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 1:
            raise ValueError(f"points must be a non-empty (N, 3) array, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        for name in ("colors", "intensities"):
            channel = getattr(self, name)
            if channel is None:
                continue
            arr = np.asarray(channel, dtype=np.float64)
            expected = (len(pts), 3) if name == "colors" else (len(pts),)
            if arr.shape != expected:
                raise ValueError(f"{name} shape {arr.shape} != {expected}")
            arr = np.ascontiguousarray(arr)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(
            self, "center_offset", tuple(float(c) for c in self.center_offset)
        )

    def __len__(self) -> int:
        return len(self.points)


# --- format detection ---------------------------------------------------------

_EXTENSION_TAGS = {
    ".bin": FormatTag.BIN,
    ".xyz": FormatTag.XYZ,
    ".xyzn": FormatTag.XYZN,
    ".xyzrgb": FormatTag.XYZRGB,
    ".pts": FormatTag.PTS,
}

SUPPORTED_EXTENSIONS = (".bin", ".pcd", ".ply", ".pts", ".xyz", ".xyzn", ".xyzrgb")


def detect_format(path, head: Optional[bytes] = None) -> FormatTag:
    """Resolve the format tag from the extension, sniffing .pcd/.ply headers.

    ``head`` is the first 256 bytes of the file; it is read from ``path``
    when not supplied.
    """
    path = Path(path)
    ext = path.suffix.lower()
    if ext in _EXTENSION_TAGS:
        return _EXTENSION_TAGS[ext]
    if ext not in (".pcd", ".ply"):
        raise UnsupportedFormat(f"unknown point cloud extension {ext!r} ({path.name})")
    if head is None:
        try:
            with open(path, "rb") as fh:
                head = fh.read(256)
        except OSError as exc:
            raise IoFailure(f"cannot read {path}: {exc}") from exc
    if not head:
        raise MalformedHeader(f"{path.name}: empty file")
    if ext == ".pcd":
        for line in head.splitlines():
            if line.upper().startswith(b"DATA"):
                mode = line.split()[1].lower() if len(line.split()) > 1 else b""
                if mode == b"ascii":
                    return FormatTag.PCD_ASCII
                if mode == b"binary":
                    return FormatTag.PCD_BINARY
                if mode == b"binary_compressed":
                    raise UnsupportedFormat(f"{path.name}: PCD binary_compressed")
                raise MalformedHeader(f"{path.name}: unknown PCD DATA mode {mode!r}")
        raise MalformedHeader(f"{path.name}: no DATA line in PCD header")
    if not head.startswith(b"ply"):
        raise MalformedHeader(f"{path.name}: missing 'ply' magic")
    for line in head.splitlines():
        if line.startswith(b"format"):
            parts = line.split()
            if len(parts) >= 2 and parts[1] == b"ascii":
                return FormatTag.PLY_ASCII
            if len(parts) >= 2 and parts[1] == b"binary_little_endian":
                return FormatTag.PLY_BINARY
            if len(parts) >= 2 and parts[1] == b"binary_big_endian":
                raise UnsupportedFormat(f"{path.name}: big-endian PLY")
            raise MalformedHeader(f"{path.name}: unknown PLY format line {line!r}")
    raise MalformedHeader(f"{path.name}: no format line in PLY header")


# --- channel normalization ------------------------------------------------------


def _normalize_unit(values: np.ndarray) -> np.ndarray:
    """Map color/intensity data to [0, 1]; 8-bit integer sources divide by 255."""
    values = values.astype(np.float64)
    if values.size and float(values.max()) > 1.0:
        values = values / 255.0
    return np.clip(values, 0.0, 1.0)


def _parse_text_rows(text: str, columns: int, what: str) -> np.ndarray:
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        if len(parts) != columns:
            raise MalformedFile(
                f"{what}: line {lineno} has {len(parts)} fields, expected {columns}"
            )
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise MalformedFile(f"{what}: line {lineno}: {exc}") from exc
    if not rows:
        raise MalformedFile(f"{what}: no data rows")
    return np.asarray(rows, dtype=np.float64)


# --- per-format parsers ---------------------------------------------------------


def _decode_text(data: bytes, what: str) -> str:
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedFile(f"{what}: not valid text ({exc})") from exc


def _parse_bin(data: bytes, name: str):
    if len(data) == 0 or len(data) % 16 != 0:
        raise MalformedFile(
            f"{name}: byte count {len(data)} is not a multiple of 16 (x,y,z,i float32)"
        )
    arr = np.frombuffer(data, dtype="<f4").reshape(-1, 4)
    if not np.all(np.isfinite(arr)):
        raise MalformedFile(f"{name}: non-finite values")
    return arr[:, :3].astype(np.float64), None, _normalize_unit(arr[:, 3])


def _parse_xyz(data: bytes, name: str):
    rows = _parse_text_rows(_decode_text(data, name), 3, name)
    return rows, None, None


def _parse_xyzn(data: bytes, name: str):
    # Normals are parsed for validation but not retained.
    rows = _parse_text_rows(_decode_text(data, name), 6, name)
    return rows[:, :3], None, None


def _parse_xyzrgb(data: bytes, name: str):
    rows = _parse_text_rows(_decode_text(data, name), 6, name)
    return rows[:, :3], _normalize_unit(rows[:, 3:6]), None


def _parse_pts(data: bytes, name: str):
    text = _decode_text(data, name)
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise MalformedFile(f"{name}: missing point count line")
    try:
        declared = int(lines[0].split()[0])
    except ValueError as exc:
        raise MalformedFile(f"{name}: bad count line {lines[0]!r}") from exc
    if declared < 1:
        raise MalformedFile(f"{name}: declared count {declared} < 1")
    records = [ln for ln in lines[1:] if ln.strip()]
    if len(records) < declared:
        raise InconsistentCounts(
            f"{name}: declared {declared} points, found {len(records)} records"
        )
    records = records[:declared]
    first_cols = len(records[0].split())
    if first_cols not in (3, 4, 6, 7):
        raise MalformedFile(f"{name}: unsupported column count {first_cols}")
    rows = _parse_text_rows("\n".join(records), first_cols, name)
    xyz = rows[:, :3]
    colors = intensities = None
    if first_cols == 4:
        intensities = _normalize_unit(rows[:, 3])
    elif first_cols == 6:
        colors = _normalize_unit(rows[:, 3:6])
    elif first_cols == 7:
        intensities = _normalize_unit(rows[:, 3])
        colors = _normalize_unit(rows[:, 4:7])
    return xyz, colors, intensities


_PCD_TYPE_MAP = {
    ("F", 4): "<f4",
    ("F", 8): "<f8",
    ("U", 1): "<u1",
    ("U", 2): "<u2",
    ("U", 4): "<u4",
    ("U", 8): "<u8",
    ("I", 1): "<i1",
    ("I", 2): "<i2",
    ("I", 4): "<i4",
    ("I", 8): "<i8",
}


def _parse_pcd_header(data: bytes, name: str):
    lines = data.split(b"\n")
    meta = {}
    offset = 0
    for raw in lines:
        offset += len(raw) + 1
        line = raw.strip()
        if not line or line.startswith(b"#"):
            continue
        parts = line.decode("ascii", "replace").split()
        key = parts[0].upper()
        meta[key] = parts[1:]
        if key == "DATA":
            break
    else:
        raise MalformedHeader(f"{name}: no DATA line")
    for required in ("FIELDS", "SIZE", "TYPE", "POINTS", "DATA"):
        if required not in meta:
            raise MalformedHeader(f"{name}: PCD header missing {required}")
    try:
        count = int(meta["POINTS"][0])
    except (ValueError, IndexError) as exc:
        raise MalformedHeader(f"{name}: bad POINTS value") from exc
    fields = [f.lower() for f in meta["FIELDS"]]
    try:
        sizes = [int(s) for s in meta["SIZE"]]
        counts = [int(c) for c in meta.get("COUNT", ["1"] * len(fields))]
    except ValueError as exc:
        raise MalformedHeader(f"{name}: bad SIZE/COUNT") from exc
    types = meta["TYPE"]
    if not (len(fields) == len(sizes) == len(types) == len(counts)):
        raise MalformedHeader(f"{name}: FIELDS/SIZE/TYPE/COUNT length mismatch")
    if any(c != 1 for c in counts):
        raise UnsupportedFormat(f"{name}: PCD COUNT > 1 fields")
    dtype = []
    for fname, ftype, fsize in zip(fields, types, sizes):
        key = (ftype.upper(), fsize)
        if key not in _PCD_TYPE_MAP:
            raise MalformedHeader(f"{name}: unsupported PCD field type {key}")
        dtype.append((fname, _PCD_TYPE_MAP[key]))
    return fields, np.dtype(dtype), count, offset


def _unpack_rgb_u32(packed: np.ndarray) -> np.ndarray:
    packed = packed.astype(np.uint32)
    r = (packed >> 16) & 0xFF
    g = (packed >> 8) & 0xFF
    b = packed & 0xFF
    return np.stack([r, g, b], axis=1).astype(np.float64) / 255.0


def _extract_pcd_channels(records: np.ndarray, fields: list[str], name: str):
    for axis in ("x", "y", "z"):
        if axis not in fields:
            raise MalformedFile(f"{name}: PCD missing {axis} field")
    xyz = np.stack(
        [records["x"], records["y"], records["z"]], axis=1
    ).astype(np.float64)
    colors = None
    if "rgb" in fields:
        raw = np.ascontiguousarray(records["rgb"])
        packed = (
            raw.view(np.uint32) if raw.dtype.kind == "f" else raw.astype(np.uint32)
        )
        colors = _unpack_rgb_u32(packed)
    elif all(c in fields for c in ("r", "g", "b")):
        colors = _normalize_unit(
            np.stack([records["r"], records["g"], records["b"]], axis=1)
        )
    intensities = None
    if "intensity" in fields:
        intensities = _normalize_unit(records["intensity"])
    return xyz, colors, intensities


def _parse_pcd(data: bytes, name: str, binary: bool):
    fields, dtype, count, offset = _parse_pcd_header(data, name)
    if count < 1:
        raise MalformedFile(f"{name}: POINTS {count} < 1")
    if binary:
        body = data[offset : offset + count * dtype.itemsize]
        if len(body) < count * dtype.itemsize:
            have = len(body) // dtype.itemsize
            raise InconsistentCounts(
                f"{name}: declared {count} points, payload holds {have}"
            )
        records = np.frombuffer(body, dtype=dtype, count=count)
    else:
        text = _decode_text(data[offset:], name)
        rows = [ln.split() for ln in text.splitlines() if ln.strip()]
        if len(rows) < count:
            raise InconsistentCounts(
                f"{name}: declared {count} points, found {len(rows)} records"
            )
        rows = rows[:count]
        records = np.zeros(count, dtype=dtype)
        for i, row in enumerate(rows):
            if len(row) != len(fields):
                raise MalformedFile(
                    f"{name}: record {i} has {len(row)} fields, expected {len(fields)}"
                )
            for fname, token in zip(fields, row):
                try:
                    records[fname][i] = (
                        float(token) if dtype[fname].kind == "f" else int(float(token))
                    )
                except ValueError as exc:
                    raise MalformedFile(f"{name}: record {i}: {exc}") from exc
    xyz, colors, intensities = _extract_pcd_channels(records, fields, name)
    if not np.all(np.isfinite(xyz)):
        raise MalformedFile(f"{name}: non-finite coordinates")
    return xyz, colors, intensities


_PLY_TYPE_MAP = {
    "float": "<f4",
    "float32": "<f4",
    "double": "<f8",
    "float64": "<f8",
    "uchar": "<u1",
    "uint8": "<u1",
    "ushort": "<u2",
    "uint16": "<u2",
    "uint": "<u4",
    "uint32": "<u4",
    "char": "<i1",
    "int8": "<i1",
    "short": "<i2",
    "int16": "<i2",
    "int": "<i4",
    "int32": "<i4",
}


def _parse_ply(data: bytes, name: str, binary: bool):
    end = data.find(b"end_header")
    if end < 0:
        raise MalformedHeader(f"{name}: no end_header")
    header = data[:end].decode("ascii", "replace").splitlines()
    body_offset = data.find(b"\n", end) + 1
    if body_offset == 0:
        raise MalformedHeader(f"{name}: truncated after end_header")
    vertex_count = None
    properties: list[tuple[str, str]] = []
    in_vertex = False
    for line in header:
        parts = line.strip().split()
        if not parts:
            continue
        if parts[0] == "element":
            in_vertex = len(parts) >= 3 and parts[1] == "vertex"
            if in_vertex:
                try:
                    vertex_count = int(parts[2])
                except ValueError as exc:
                    raise MalformedHeader(f"{name}: bad vertex count") from exc
        elif parts[0] == "property" and in_vertex:
            if parts[1] == "list":
                raise MalformedHeader(f"{name}: list property on vertex element")
            if parts[1] not in _PLY_TYPE_MAP:
                raise MalformedHeader(f"{name}: unknown property type {parts[1]!r}")
            properties.append((parts[2].lower(), _PLY_TYPE_MAP[parts[1]]))
    if vertex_count is None:
        raise MalformedHeader(f"{name}: no vertex element")
    if vertex_count < 1:
        raise MalformedFile(f"{name}: vertex count {vertex_count} < 1")
    names = [p[0] for p in properties]
    dtype = np.dtype([(n, t) for n, t in properties])
    if binary:
        body = data[body_offset : body_offset + vertex_count * dtype.itemsize]
        if len(body) < vertex_count * dtype.itemsize:
            have = len(body) // dtype.itemsize
            raise InconsistentCounts(
                f"{name}: declared {vertex_count} vertices, payload holds {have}"
            )
        records = np.frombuffer(body, dtype=dtype, count=vertex_count)
    else:
        text = _decode_text(data[body_offset:], name)
        rows = [ln.split() for ln in text.splitlines() if ln.strip()]
        if len(rows) < vertex_count:
            raise InconsistentCounts(
                f"{name}: declared {vertex_count} vertices, found {len(rows)} records"
            )
        records = np.zeros(vertex_count, dtype=dtype)
        for i, row in enumerate(rows[:vertex_count]):
            if len(row) < len(names):
                raise MalformedFile(f"{name}: vertex record {i} too short")
            for pname, token in zip(names, row):
                try:
                    records[pname][i] = float(token)
                except ValueError as exc:
                    raise MalformedFile(f"{name}: vertex record {i}: {exc}") from exc
    for axis in ("x", "y", "z"):
        if axis not in names:
            raise MalformedFile(f"{name}: PLY missing {axis} property")
    xyz = np.stack([records["x"], records["y"], records["z"]], axis=1).astype(
        np.float64
    )
    if not np.all(np.isfinite(xyz)):
        raise MalformedFile(f"{name}: non-finite coordinates")
    colors = None
    if all(c in names for c in ("red", "green", "blue")):
        colors = _normalize_unit(
            np.stack([records["red"], records["green"], records["blue"]], axis=1)
        )
    intensities = None
    if "intensity" in names:
        intensities = _normalize_unit(records["intensity"])
    return xyz, colors, intensities


_PARSERS = {
    FormatTag.BIN: _parse_bin,
    FormatTag.XYZ: _parse_xyz,
    FormatTag.XYZN: _parse_xyzn,
    FormatTag.XYZRGB: _parse_xyzrgb,
    FormatTag.PTS: _parse_pts,
    FormatTag.PCD_ASCII: lambda d, n: _parse_pcd(d, n, binary=False),
    FormatTag.PCD_BINARY: lambda d, n: _parse_pcd(d, n, binary=True),
    FormatTag.PLY_ASCII: lambda d, n: _parse_ply(d, n, binary=False),
    FormatTag.PLY_BINARY: lambda d, n: _parse_ply(d, n, binary=True),
}


# --- sidecar alignment metadata -------------------------------------------------


def sidecar_path(cloud_path) -> Path:
    return Path(str(cloud_path) + SIDECAR_SUFFIX)


def _sidecar_lock(path: Path) -> threading.Lock:
    key = str(path)
    with _sidecar_locks_guard:
        return _sidecar_locks.setdefault(key, threading.Lock())


def read_sidecar(cloud_path) -> Optional[np.ndarray]:
    """Return the persisted alignment rotation for a cloud, if any."""
    meta_path = sidecar_path(cloud_path)
    if not meta_path.exists():
        return None
    try:
        meta = json.loads(meta_path.read_text())
        rot = np.asarray(meta["rotation"], dtype=np.float64).reshape(3, 3)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise MalformedFile(f"{meta_path.name}: bad sidecar ({exc})") from exc
    if not np.allclose(rot @ rot.T, np.eye(3), atol=1e-6):
        raise MalformedFile(f"{meta_path.name}: sidecar rotation not orthonormal")
    return rot


def write_sidecar(cloud_path, rotation: np.ndarray, center_offset) -> None:
    meta_path = sidecar_path(cloud_path)
    payload = {
        "rotation": [float(v) for v in np.asarray(rotation).reshape(9)],
        "center_offset": [float(c) for c in center_offset],
    }
    with _sidecar_lock(meta_path):
        tmp = meta_path.with_name(meta_path.name + ".tmp")
        try:
            tmp.write_text(json.dumps(payload, indent=2) + "\n")
            os.replace(tmp, meta_path)
        except OSError as exc:
            raise IoFailure(f"cannot write sidecar {meta_path}: {exc}") from exc


# --- load / save ----------------------------------------------------------------


def load_cloud(path) -> PointCloud:
    """Parse a point cloud file, center it, and apply any persisted alignment."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    tag = detect_format(path, data[:256])
    xyz, colors, intensities = _PARSERS[tag](data, path.name)
    del data
    if len(xyz) < 1:
        raise MalformedFile(f"{path.name}: no points")
    centroid = xyz.mean(axis=0)
    points = xyz - centroid
    rotation = read_sidecar(path)
    if rotation is not None:
        points = points @ rotation.T
    return PointCloud(
        points=points,
        colors=colors,
        intensities=intensities,
        source_path=str(path),
        format=tag,
        center_offset=tuple(float(c) for c in centroid),
    )


def _lossy_warnings(cloud: PointCloud, tag: FormatTag) -> list[str]:
    dropped = []
    if cloud.colors is not None and not tag.supports_colors:
        dropped.append("colors")
    if cloud.intensities is not None and not tag.supports_intensities:
        dropped.append("intensities")
    return dropped


def _fmt_rows(rows: np.ndarray) -> str:
    out = io.StringIO()
    np.savetxt(out, rows, fmt="%.10g")
    return out.getvalue()


def _color_bytes(colors: np.ndarray) -> np.ndarray:
    return np.clip(np.round(colors * 255.0), 0, 255).astype(np.uint8)


def _write_bin(cloud: PointCloud) -> bytes:
    n = len(cloud)
    arr = np.zeros((n, 4), dtype="<f4")
    arr[:, :3] = cloud.points + np.asarray(cloud.center_offset)
    if cloud.intensities is not None:
        arr[:, 3] = cloud.intensities
    return arr.tobytes()


def _write_xyz(cloud: PointCloud) -> bytes:
    world = cloud.points + np.asarray(cloud.center_offset)
    return _fmt_rows(world).encode()


def _write_xyzn(cloud: PointCloud) -> bytes:
    world = cloud.points + np.asarray(cloud.center_offset)
    rows = np.hstack([world, np.zeros_like(world)])
    return _fmt_rows(rows).encode()


def _write_xyzrgb(cloud: PointCloud) -> bytes:
    world = cloud.points + np.asarray(cloud.center_offset)
    colors = cloud.colors if cloud.colors is not None else np.zeros_like(world)
    return _fmt_rows(np.hstack([world, colors])).encode()


def _write_pts(cloud: PointCloud) -> bytes:
    world = cloud.points + np.asarray(cloud.center_offset)
    columns = [world]
    if cloud.intensities is not None:
        columns.append(cloud.intensities[:, None])
    if cloud.colors is not None:
        columns.append(_color_bytes(cloud.colors).astype(np.float64))
    rows = np.hstack(columns)
    return (f"{len(cloud)}\n" + _fmt_rows(rows)).encode()


def _write_pcd(cloud: PointCloud, binary: bool) -> bytes:
    world = (cloud.points + np.asarray(cloud.center_offset)).astype("<f4")
    fields, sizes, types = ["x", "y", "z"], [4, 4, 4], ["F", "F", "F"]
    dtype = [("x", "<f4"), ("y", "<f4"), ("z", "<f4")]
    if cloud.intensities is not None:
        fields.append("intensity")
        sizes.append(4)
        types.append("F")
        dtype.append(("intensity", "<f4"))
    if cloud.colors is not None:
        fields.append("rgb")
        sizes.append(4)
        types.append("U")
        dtype.append(("rgb", "<u4"))
    n = len(cloud)
    records = np.zeros(n, dtype=dtype)
    records["x"], records["y"], records["z"] = world[:, 0], world[:, 1], world[:, 2]
    if cloud.intensities is not None:
        records["intensity"] = cloud.intensities.astype("<f4")
    if cloud.colors is not None:
        rgb = _color_bytes(cloud.colors).astype(np.uint32)
        records["rgb"] = (rgb[:, 0] << 16) | (rgb[:, 1] << 8) | rgb[:, 2]
    header = "\n".join(
        [
            "# .PCD v0.7 - Point Cloud Data file format",
            "VERSION 0.7",
            "FIELDS " + " ".join(fields),
            "SIZE " + " ".join(str(s) for s in sizes),
            "TYPE " + " ".join(types),
            "COUNT " + " ".join("1" for _ in fields),
            f"WIDTH {n}",
            "HEIGHT 1",
            "VIEWPOINT 0 0 0 1 0 0 0",
            f"POINTS {n}",
            "DATA " + ("binary" if binary else "ascii"),
            "",
        ]
    ).encode()
    if binary:
        return header + records.tobytes()
    body_cols = [world[:, 0], world[:, 1], world[:, 2]]
    fmts = ["%.10g", "%.10g", "%.10g"]
    if cloud.intensities is not None:
        body_cols.append(cloud.intensities)
        fmts.append("%.10g")
    if cloud.colors is not None:
        body_cols.append(records["rgb"].astype(np.float64))
        fmts.append("%d")
    out = io.StringIO()
    np.savetxt(out, np.column_stack(body_cols), fmt=" ".join(fmts))
    return header + out.getvalue().encode()


def _write_ply(cloud: PointCloud, binary: bool) -> bytes:
    world = (cloud.points + np.asarray(cloud.center_offset)).astype("<f4")
    n = len(cloud)
    props = [("x", "<f4"), ("y", "<f4"), ("z", "<f4")]
    header_props = ["property float x", "property float y", "property float z"]
    if cloud.intensities is not None:
        props.append(("intensity", "<f4"))
        header_props.append("property float intensity")
    if cloud.colors is not None:
        props += [("red", "<u1"), ("green", "<u1"), ("blue", "<u1")]
        header_props += [
            "property uchar red",
            "property uchar green",
            "property uchar blue",
        ]
    records = np.zeros(n, dtype=props)
    records["x"], records["y"], records["z"] = world[:, 0], world[:, 1], world[:, 2]
    if cloud.intensities is not None:
        records["intensity"] = cloud.intensities.astype("<f4")
    if cloud.colors is not None:
        rgb = _color_bytes(cloud.colors)
        records["red"], records["green"], records["blue"] = (
            rgb[:, 0],
            rgb[:, 1],
            rgb[:, 2],
        )
    header = "\n".join(
        [
            "ply",
            "format " + ("binary_little_endian 1.0" if binary else "ascii 1.0"),
            f"element vertex {n}",
            *header_props,
            "end_header",
            "",
        ]
    ).encode()
    if binary:
        return header + records.tobytes()
    columns, fmts = [world[:, 0], world[:, 1], world[:, 2]], ["%.10g"] * 3
    if cloud.intensities is not None:
        columns.append(cloud.intensities)
        fmts.append("%.10g")
    if cloud.colors is not None:
        rgb = _color_bytes(cloud.colors)
        columns += [rgb[:, 0], rgb[:, 1], rgb[:, 2]]
        fmts += ["%d"] * 3
    out = io.StringIO()
    np.savetxt(out, np.column_stack(columns), fmt=" ".join(fmts))
    return header + out.getvalue().encode()


_WRITERS = {
    FormatTag.BIN: _write_bin,
    FormatTag.XYZ: _write_xyz,
    FormatTag.XYZN: _write_xyzn,
    FormatTag.XYZRGB: _write_xyzrgb,
    FormatTag.PTS: _write_pts,
    FormatTag.PCD_ASCII: lambda c: _write_pcd(c, binary=False),
    FormatTag.PCD_BINARY: lambda c: _write_pcd(c, binary=True),
    FormatTag.PLY_ASCII: lambda c: _write_ply(c, binary=False),
    FormatTag.PLY_BINARY: lambda c: _write_ply(c, binary=True),
}


def save_cloud(cloud: PointCloud, path, format: Optional[FormatTag] = None) -> None:
    """Serialize a cloud with its center offset restored (world coordinates).

    Emits :class:`LossyWriteWarning` when the target format cannot hold a
    channel the cloud carries; the write still succeeds.
    """
    path = Path(path)
    if format is None:
        format = detect_format_for_write(path)
    dropped = _lossy_warnings(cloud, format)
    if dropped:
        warnings.warn(
            f"{format.name} cannot store {', '.join(dropped)}; dropped",
            LossyWriteWarning,
            stacklevel=2,
        )
    payload = _WRITERS[format](cloud)
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_bytes(payload)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def detect_format_for_write(path) -> FormatTag:
    """Pick a write format from the extension; binary variants are default."""
    ext = Path(path).suffix.lower()
    mapping = dict(_EXTENSION_TAGS)
    mapping[".pcd"] = FormatTag.PCD_BINARY
    mapping[".ply"] = FormatTag.PLY_BINARY
    if ext not in mapping:
        raise UnsupportedFormat(f"unknown point cloud extension {ext!r}")
    return mapping[ext]


# --- floor alignment -------------------------------------------------------------


def _rotation_to_z(normal: np.ndarray) -> np.ndarray:
    """Rotation matrix mapping the unit vector ``normal`` onto (0, 0, 1)."""
    z = np.array([0.0, 0.0, 1.0])
    axis = np.cross(normal, z)
    s = float(np.linalg.norm(axis))
    c = float(normal @ z)
    if s < 1e-15:
        return np.eye(3)
    k = axis / s
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + kx * s + kx @ kx * (1.0 - c)


def align_to_floor(
    cloud: PointCloud,
    p1: Sequence[float],
    p2: Sequence[float],
    p3: Sequence[float],
) -> tuple[PointCloud, np.ndarray]:
    """Rotate the cloud so the plane through three picked points becomes z-up.

    The plane normal (oriented toward the current +z hemisphere) is mapped
    onto (0, 0, 1); points rotate about the cloud origin. The rotation is
    composed with any previous alignment and persisted in the sidecar so a
    reload reproduces the aligned cloud.
    """
    a = np.asarray(p1, dtype=np.float64)
    b = np.asarray(p2, dtype=np.float64)
    c = np.asarray(p3, dtype=np.float64)
    cross = np.cross(b - a, c - a)
    area = float(np.linalg.norm(cross)) / 2.0
    if area <= 1e-9:
        raise DegeneratePlane(f"picked points span area {area:.3e} m^2")
    normal = cross / (2.0 * area)
    if normal[2] < 0:
        normal = -normal
    rotation = _rotation_to_z(normal)
    rotated = PointCloud(
        points=cloud.points @ rotation.T,
        colors=cloud.colors,
        intensities=cloud.intensities,
        source_path=cloud.source_path,
        format=cloud.format,
        center_offset=cloud.center_offset,
    )
    if cloud.source_path:
        previous = read_sidecar(cloud.source_path)
        total = rotation @ previous if previous is not None else rotation
        write_sidecar(cloud.source_path, total, cloud.center_offset)
    return rotated, rotation
