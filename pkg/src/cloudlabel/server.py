"""Local HTTP service exposing the annotation core to a browser UI.

All geometry and selection math stays here; the UI is a thin client that
round-trips every mutation. JSON everywhere except the point stream:

* ``GET  /api/session``                    session folder, cloud list, progress
* ``GET  /api/clouds/{id}/points``         binary: magic ``LCPC``, u32-le point
  count, u8 flags (bit0 = colors), float32 xyz triples, then u8 rgb triples
* ``GET  /api/clouds/{id}/labels``         annotation set (centroid_abs schema)
* ``POST /api/clouds/{id}/labels``         persist annotation set
* ``POST /api/selection``                  click + depth patch -> world point
* ``POST /api/geometry/spanning``          four picks -> box
* ``POST /api/geometry/face_pull``         box + face + delta -> box
* ``POST /api/geometry/transform``         box + op -> box
* ``GET  /api/config``                     active configuration

Errors come back as ``{"code", "message"}`` envelopes with a 4xx status.
Label writes are atomic and serialized; concurrent reads always see a
complete file. Loaded clouds are immutable and served from cache.
"""

from __future__ import annotations

import json
import math
import re
import struct
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional

import numpy as np

from cloudlabel.cloud_io import PointCloud, load_cloud
from cloudlabel.config import Config, config_to_dict
from cloudlabel.errors import (
    CloudLabelError,
    DegenerateSpan,
    MalformedLabelFile,
    NoPointNearClick,
    UnrepresentableRotation,
)
from cloudlabel.geometry import Face, Rotate, Scale, Translate, face_pull, transform_bbox
from cloudlabel.label_io import (
    AnnotationSet,
    box_from_json,
    box_to_json,
    export_labels,
    import_labels,
    is_labeled,
    label_extension,
    list_clouds,
    read_labels,
    write_labels,
)
from cloudlabel.labeling import SpanningMethod
from cloudlabel.selection import select_world_point_from_patch
from cloudlabel.viewpoint import camera_from_dict

POINT_STREAM_MAGIC = b"LCPC"


class RequestError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class SessionState:
    """Everything one serving session owns: folders, config, cloud cache."""

    def __init__(self, folder, label_folder, config: Config):
        self.folder = Path(folder)
        self.label_folder = Path(label_folder)
        self.label_folder.mkdir(parents=True, exist_ok=True)
        self.config = config
        self.clouds = list_clouds(self.folder)
        self._cache: dict[int, PointCloud] = {}
        self._cache_lock = threading.Lock()
        self.write_lock = threading.Lock()  # one mutating session at a time

    def cloud_path(self, cloud_id: int) -> Path:
        if not (0 <= cloud_id < len(self.clouds)):
            raise RequestError(404, "unknown_cloud", f"no cloud with id {cloud_id}")
        return self.clouds[cloud_id]

    def cloud(self, cloud_id: int) -> PointCloud:
        path = self.cloud_path(cloud_id)
        with self._cache_lock:
            if cloud_id not in self._cache:
                self._cache[cloud_id] = load_cloud(path)
            return self._cache[cloud_id]

    def label_path(self, cloud_id: int) -> Path:
        stem = self.cloud_path(cloud_id).stem
        return self.label_folder / (stem + label_extension(self.config.export.format))

    def session_payload(self) -> dict:
        clouds = [
            {
                "id": i,
                "name": path.name,
                "labeled": is_labeled(path, self.label_folder),
            }
            for i, path in enumerate(self.clouds)
        ]
        labeled = sum(1 for c in clouds if c["labeled"])
        total = len(clouds)
        return {
            "folder": str(self.folder),
            "clouds": clouds,
            "progress": {
                "total_clouds": total,
                "labeled_clouds": labeled,
                "fraction": labeled / total if total else 0.0,
            },
        }

    def point_stream(self, cloud_id: int) -> bytes:
        cloud = self.cloud(cloud_id)
        flags = 1 if cloud.colors is not None else 0
        head = POINT_STREAM_MAGIC + struct.pack("<IB", len(cloud), flags)
        body = cloud.points.astype("<f4").tobytes()
        if cloud.colors is not None:
            body += (
                np.clip(np.round(cloud.colors * 255.0), 0, 255)
                .astype(np.uint8)
                .tobytes()
            )
        return head + body

    def read_annotation_json(self, cloud_id: int) -> bytes:
        path = self.label_path(cloud_id)
        cloud = self.cloud(cloud_id)
        if path.is_file() and path.stat().st_size > 0:
            aset = read_labels(path, self.config.export.format, cloud.center_offset)
        else:
            aset = AnnotationSet(
                cloud_name=self.cloud_path(cloud_id).stem,
                cloud_path=str(self.cloud_path(cloud_id)),
                objects=(),
            )
        return export_labels(
            aset,
            "centroid_abs",
            self.config.export.precision,
            cloud.center_offset,
        )

    def write_annotation_json(self, cloud_id: int, data: bytes) -> None:
        cloud = self.cloud(cloud_id)
        aset = import_labels(data, "centroid_abs", cloud.center_offset)
        aset = AnnotationSet(
            cloud_name=self.cloud_path(cloud_id).stem,
            cloud_path=str(self.cloud_path(cloud_id)),
            objects=aset.objects,
        )
        with self.write_lock:
            write_labels(
                aset,
                self.label_path(cloud_id),
                self.config.export.format,
                self.config.export.precision,
                cloud.center_offset,
            )


# --- request handlers --------------------------------------------------------------


def _selection_response(state: SessionState, payload: dict) -> dict:
    try:
        camera = camera_from_dict(payload["camera"])
        click = payload["click"]
        px, py = float(click["px"]), float(click["py"])
        patch_info = payload["patch"]
        radius = int(patch_info["radius"])
        depths = np.asarray(patch_info["depths"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise RequestError(400, "bad_request", f"malformed selection request: {exc}")
    side = 2 * radius + 1
    if depths.size != side * side:
        raise RequestError(
            400,
            "bad_request",
            f"patch needs {side * side} depths for radius {radius}, got {depths.size}",
        )
    patch = np.clip(depths.reshape(side, side), 0.0, 1.0)
    point = select_world_point_from_patch(camera, px, py, patch, state.config.selection)
    return {"point": {"x": float(point[0]), "y": float(point[1]), "z": float(point[2])}}


def _spanning_response(state: SessionState, payload: dict) -> dict:
    """Finalize a 4-pick span, or preview a partial draft (2 or 3 picks)."""
    try:
        picks = []
        for key in ("p1", "p2", "p3", "p4"):
            if key in payload and payload[key] is not None:
                picks.append(tuple(float(c) for c in payload[key]))
            else:
                break
        category = str(payload.get("category", state.config.categories[0].name))
    except (TypeError, ValueError) as exc:
        raise RequestError(400, "bad_request", f"malformed spanning request: {exc}")
    if len(picks) < 2:
        raise RequestError(400, "bad_request", "spanning needs at least p1 and p2")
    method = SpanningMethod(category, min_dimension=state.config.min_dimension)
    for pick in picks:
        method.register_click(pick)
    if method.is_complete():
        box = method.finalize()
        complete = True
    else:
        box = method.preview()
        complete = False
    reply = box_to_json(box, precision=state.config.export.precision)
    reply["complete"] = complete
    return reply


def _face_pull_response(state: SessionState, payload: dict) -> dict:
    try:
        box = box_from_json(payload["bbox"])
        face = Face[str(payload["face"]).upper()]
        delta = float(payload["delta"])
    except (KeyError, TypeError, ValueError) as exc:
        raise RequestError(400, "bad_request", f"malformed face_pull request: {exc}")
    result = face_pull(box, face, delta, state.config.min_dimension)
    reply = box_to_json(result.box, precision=state.config.export.precision)
    reply["clamped"] = result.clamped
    return reply


def _transform_response(state: SessionState, payload: dict) -> dict:
    try:
        box = box_from_json(payload["bbox"])
        op_data = payload["op"]
        kind = op_data["kind"]
        if kind == "translate":
            op = Translate(tuple(float(c) for c in op_data["delta"]))
        elif kind == "rotate":
            op = Rotate(
                str(op_data["axis"]), math.radians(float(op_data["angle_deg"]))
            )
        elif kind == "scale":
            op = Scale(str(op_data["axis"]), float(op_data["delta"]))
        else:
            raise ValueError(f"unknown op kind {kind!r}")
    except (KeyError, TypeError, ValueError) as exc:
        raise RequestError(400, "bad_request", f"malformed transform request: {exc}")
    result = transform_bbox(box, op, state.config.min_dimension)
    reply = box_to_json(result.box, precision=state.config.export.precision)
    reply["clamped"] = result.clamped
    return reply


_CLOUD_ROUTE = re.compile(r"^/api/clouds/(\d+)/(points|labels)$")


class _Handler(BaseHTTPRequestHandler):
    state: SessionState  # injected by make_server
    ui_dir: Optional[Path] = None
    quiet = True

    # -- plumbing --

    def log_message(self, fmt, *args):
        if not self.quiet:
            super().log_message(fmt, *args)

    def _send(self, status: int, body: bytes, content_type: str):
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, payload: dict, status: int = 200):
        self._send(status, (json.dumps(payload) + "\n").encode(), "application/json")

    def _send_error_envelope(self, status: int, code: str, message: str):
        self._send_json({"code": code, "message": message}, status)

    def _read_body(self) -> bytes:
        length = int(self.headers.get("Content-Length", "0"))
        return self.rfile.read(length)

    def _read_json(self) -> dict:
        try:
            return json.loads(self._read_body().decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise RequestError(400, "bad_request", f"body is not valid JSON: {exc}")

    def _dispatch(self, handler):
        try:
            handler()
        except RequestError as exc:
            self._send_error_envelope(exc.status, exc.code, exc.message)
        except NoPointNearClick as exc:
            self._send_error_envelope(422, "no_point_near_click", str(exc))
        except UnrepresentableRotation as exc:
            self._send_error_envelope(422, "unrepresentable_rotation", str(exc))
        except DegenerateSpan as exc:
            self._send_error_envelope(422, "degenerate_span", str(exc))
        except MalformedLabelFile as exc:
            self._send_error_envelope(400, "malformed_labels", str(exc))
        except CloudLabelError as exc:
            self._send_error_envelope(422, "core_error", str(exc))
        except Exception as exc:  # pragma: no cover - last resort
            self._send_error_envelope(500, "internal_error", str(exc))

    # -- routes --

    def do_GET(self):
        self._dispatch(self._get)

    def do_POST(self):
        self._dispatch(self._post)

    def _get(self):
        state = self.state
        if self.path == "/api/session":
            self._send_json(state.session_payload())
            return
        if self.path == "/api/config":
            self._send_json(config_to_dict(state.config))
            return
        match = _CLOUD_ROUTE.match(self.path)
        if match:
            cloud_id, what = int(match.group(1)), match.group(2)
            if what == "points":
                self._send(200, state.point_stream(cloud_id), "application/octet-stream")
            else:
                self._send(200, state.read_annotation_json(cloud_id), "application/json")
            return
        if self.ui_dir is not None and self._serve_static():
            return
        raise RequestError(404, "not_found", f"no route for GET {self.path}")

    def _post(self):
        state = self.state
        match = _CLOUD_ROUTE.match(self.path)
        if match and match.group(2) == "labels":
            state.write_annotation_json(int(match.group(1)), self._read_body())
            self._send_json({"ok": True})
            return
        if self.path == "/api/selection":
            self._send_json(_selection_response(state, self._read_json()))
            return
        if self.path == "/api/geometry/spanning":
            self._send_json(_spanning_response(state, self._read_json()))
            return
        if self.path == "/api/geometry/face_pull":
            self._send_json(_face_pull_response(state, self._read_json()))
            return
        if self.path == "/api/geometry/transform":
            self._send_json(_transform_response(state, self._read_json()))
            return
        raise RequestError(404, "not_found", f"no route for POST {self.path}")

    _STATIC_TYPES = {
        ".html": "text/html",
        ".js": "text/javascript",
        ".css": "text/css",
        ".map": "application/json",
        ".ico": "image/x-icon",
    }

    def _serve_static(self) -> bool:
        rel = self.path.split("?", 1)[0].lstrip("/") or "index.html"
        candidate = (self.ui_dir / rel).resolve()
        if not str(candidate).startswith(str(self.ui_dir.resolve())):
            return False
        if not candidate.is_file():
            return False
        ctype = self._STATIC_TYPES.get(candidate.suffix, "application/octet-stream")
        self._send(200, candidate.read_bytes(), ctype)
        return True


def make_server(
    folder,
    label_folder,
    config: Config,
    port: int = 0,
    ui_dir=None,
    quiet: bool = True,
) -> ThreadingHTTPServer:
    """Build (but do not start) the protocol server; port 0 picks a free one."""
    state = SessionState(folder, label_folder, config)
    handler = type(
        "BoundHandler",
        (_Handler,),
        {
            "state": state,
            "ui_dir": Path(ui_dir) if ui_dir else None,
            "quiet": quiet,
        },
    )
    return ThreadingHTTPServer(("127.0.0.1", port), handler)


def serve_forever(server: ThreadingHTTPServer):  # pragma: no cover - CLI path
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
