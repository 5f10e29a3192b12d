"""Recorded interaction traces and their deterministic headless replay.

A trace is the event stream of one labeling session against one cloud:
mode/category switches, camera pose snapshots, clicks, scrolls, and named
correction commands, all timestamped in milliseconds. Camera poses are
explicit snapshots (not replayed navigation physics) so replay determinism
does not depend on navigation internals.

Replay drives the software rasterizer, the selection heuristics, and the
active labeling method exactly as an interactive session would, and reports
per-box interaction counts and timing. Identical (trace, cloud, config)
inputs produce bit-identical annotation sets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from cloudlabel.config import Config
from cloudlabel.errors import (
    DegenerateSpan,
    IncompleteSpan,
    NoPointNearClick,
    TraceError,
)
from cloudlabel.geometry import BBox, iou_3d
from cloudlabel.label_io import AnnotationSet
from cloudlabel.labeling import PickingMethod, SpanningMethod, adjust_bbox
from cloudlabel.selection import select_world_point
from cloudlabel.viewpoint import Camera, Rasterizer, camera_from_dict, camera_to_dict

TRACE_VERSION = 1
MODES = ("picking", "spanning", "correction")
EVENT_KINDS = ("set_mode", "set_category", "camera", "click", "scroll", "command")


@dataclass(frozen=True)
class TraceEvent:
    t: float  # milliseconds
    kind: str
    data: dict = field(default_factory=dict)


@dataclass(frozen=True)
class InteractionTrace:
    cloud: str
    events: tuple[TraceEvent, ...]
    version: int = TRACE_VERSION


def trace_from_dict(payload: dict) -> InteractionTrace:
    if not isinstance(payload, dict):
        raise TraceError(0, "trace must be a JSON object")
    events = []
    previous_t = None
    for i, raw in enumerate(payload.get("events", [])):
        if not isinstance(raw, dict):
            raise TraceError(i, "event must be an object")
        kind = raw.get("type")
        if kind not in EVENT_KINDS:
            raise TraceError(i, f"unknown event type {kind!r}")
        if "t" not in raw:
            raise TraceError(i, "event missing timestamp 't'")
        t = float(raw["t"])
        if previous_t is not None and t <= previous_t:
            raise TraceError(i, f"timestamps must strictly increase ({t} <= {previous_t})")
        previous_t = t
        data = {k: v for k, v in raw.items() if k not in ("t", "type")}
        events.append(TraceEvent(t=t, kind=kind, data=data))
    return InteractionTrace(
        cloud=str(payload.get("cloud", "")),
        events=tuple(events),
        version=int(payload.get("version", TRACE_VERSION)),
    )


def trace_to_dict(trace: InteractionTrace) -> dict:
    return {
        "version": trace.version,
        "cloud": trace.cloud,
        "events": [
            {"t": e.t, "type": e.kind, **e.data} for e in trace.events
        ],
    }


def load_trace(path) -> InteractionTrace:
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise TraceError(0, f"cannot load trace {path}: {exc}") from exc
    return trace_from_dict(payload)


# --- replay -----------------------------------------------------------------------


@dataclass(frozen=True)
class BoxRecord:
    """One produced box with its interaction accounting.

    ``interactions`` counts the clicks/scrolls that built the box up to
    completion; ``corrections`` counts command events applied afterwards.
    Wall time spans from the first building event to completion, computed
    from trace timestamps (deterministic, not the replay host's clock).
    """

    box: BBox
    interactions: int
    corrections: int
    started_ms: float
    completed_ms: float

    @property
    def wall_time_ms(self) -> float:
        return self.completed_ms - self.started_ms


@dataclass(frozen=True)
class ReplayReport:
    annotations: AnnotationSet
    records: tuple[BoxRecord, ...]
    iou_per_box: Optional[tuple[float, ...]] = None
    mean_iou: Optional[float] = None

    @property
    def interaction_counts(self) -> list[int]:
        return [r.interactions for r in self.records]


class _ReplayState:
    def __init__(self, cloud, config: Config, cloud_name: str):
        self.config = config
        self.rasterizer = Rasterizer(cloud)
        self.camera: Optional[Camera] = None
        self.buffer = None
        self.mode = "picking"
        self.category = config.categories[0]
        self.methods = {
            "picking": self._make_picking(),
            "spanning": SpanningMethod(
                self.category.name, min_dimension=config.min_dimension
            ),
        }
        self.records: list[BoxRecord] = []
        self.draft_interactions = 0
        self.draft_started: Optional[float] = None
        self.cloud_name = cloud_name

    def _make_picking(self) -> PickingMethod:
        return PickingMethod(
            self.category.name,
            self.category.default_dimensions,
            min_dimension=self.config.min_dimension,
        )

    def depth_buffer(self):
        if self.buffer is None:
            self.buffer = self.rasterizer.depth_buffer(
                self.camera, self.config.viewer.point_size_px
            )
        return self.buffer


def replay_trace(
    trace: InteractionTrace,
    cloud,
    config: Config,
    ground_truth: Optional[AnnotationSet] = None,
    cloud_name: str = "",
) -> ReplayReport:
    """Apply trace events in order and return the produced annotations.

    Raises :class:`TraceError` (with the event index) for events illegal in
    the current state: clicks before any camera pose, scrolls outside
    picking mode, commands before the first box, malformed payloads.
    """
    state = _ReplayState(cloud, config, cloud_name or trace.cloud)
    for index, event in enumerate(trace.events):
        _apply_event(state, index, event)
    annotations = AnnotationSet(
        cloud_name=state.cloud_name,
        cloud_path=trace.cloud,
        objects=tuple(r.box for r in state.records),
    )
    iou_per_box = mean_iou = None
    if ground_truth is not None:
        iou_per_box = tuple(
            max((iou_3d(r.box, gt) for gt in ground_truth.objects), default=0.0)
            for r in state.records
        )
        mean_iou = sum(iou_per_box) / len(iou_per_box) if iou_per_box else 0.0
    return ReplayReport(
        annotations=annotations,
        records=tuple(state.records),
        iou_per_box=iou_per_box,
        mean_iou=mean_iou,
    )


def _apply_event(state: _ReplayState, index: int, event: TraceEvent):
    kind, data = event.kind, event.data
    if kind == "set_mode":
        mode = data.get("mode")
        if mode not in MODES:
            raise TraceError(index, f"unknown mode {mode!r}")
        # switching drops any partial draft; nothing leaks across modes
        for method in state.methods.values():
            method.reset()
        state.draft_interactions = 0
        state.draft_started = None
        state.mode = mode
        return

    if kind == "set_category":
        name = data.get("name")
        if not isinstance(name, str) or not name:
            raise TraceError(index, "set_category needs a non-empty name")
        category = state.config.category(name)
        if category is None:
            # outside the configured list: allowed, warn-level per contract
            from cloudlabel.config import CategoryConfig

            category = CategoryConfig(name=name)
        state.category = category
        state.methods["picking"] = state._make_picking()
        state.methods["spanning"] = SpanningMethod(
            name, min_dimension=state.config.min_dimension
        )
        return

    if kind == "camera":
        try:
            state.camera = camera_from_dict(data.get("camera", {}))
        except (TypeError, ValueError, KeyError) as exc:
            raise TraceError(index, f"bad camera snapshot: {exc}") from exc
        state.buffer = None
        return

    if kind == "click":
        if state.camera is None:
            raise TraceError(index, "click before any camera pose")
        if state.mode == "correction":
            raise TraceError(index, "click is not a correction-mode event")
        try:
            px, py = float(data["px"]), float(data["py"])
        except (KeyError, TypeError, ValueError) as exc:
            raise TraceError(index, f"click needs px/py: {exc}") from exc
        try:
            point = select_world_point(
                state.camera, state.depth_buffer(), px, py, state.config.selection
            )
        except NoPointNearClick as exc:
            raise TraceError(index, f"selection failed: {exc}") from exc
        method = state.methods[state.mode]
        try:
            method.register_click(tuple(point))
        except (DegenerateSpan, IncompleteSpan) as exc:
            raise TraceError(index, str(exc)) from exc
        if state.draft_started is None:
            state.draft_started = event.t
        state.draft_interactions += 1
        if method.is_complete():
            box = method.finalize()
            state.records.append(
                BoxRecord(
                    box=box,
                    interactions=state.draft_interactions,
                    corrections=0,
                    started_ms=state.draft_started,
                    completed_ms=event.t,
                )
            )
            state.draft_interactions = 0
            state.draft_started = None
        return

    if kind == "scroll":
        if state.mode != "picking":
            raise TraceError(index, f"scroll is not a {state.mode}-mode event")
        try:
            delta = float(data["delta"])
        except (KeyError, TypeError, ValueError) as exc:
            raise TraceError(index, f"scroll needs delta: {exc}") from exc
        state.methods["picking"].register_scroll(delta)
        if state.draft_started is None:
            state.draft_started = event.t
        state.draft_interactions += 1
        return

    if kind == "command":
        if not state.records:
            raise TraceError(index, "command before any completed box")
        name = data.get("name")
        if not isinstance(name, str):
            raise TraceError(index, "command needs a name")
        last = state.records[-1]
        try:
            corrected = adjust_bbox(
                last.box, name, state.config.steps, state.config.min_dimension
            )
        except ValueError as exc:
            raise TraceError(index, str(exc)) from exc
        state.records[-1] = BoxRecord(
            box=corrected,
            interactions=last.interactions,
            corrections=last.corrections + 1,
            started_ms=last.started_ms,
            completed_ms=last.completed_ms,
        )
        return

    raise TraceError(index, f"unhandled event kind {kind!r}")


# --- trace construction helpers (used by tests, scripts, and the CLI) -------------


class TraceBuilder:
    """Convenience builder that keeps timestamps strictly increasing."""

    def __init__(self, cloud: str = ""):
        self.cloud = cloud
        self._events: list[TraceEvent] = []
        self._t = 0.0

    def _push(self, kind: str, **data) -> "TraceBuilder":
        self._t += 10.0
        self._events.append(TraceEvent(t=self._t, kind=kind, data=data))
        return self

    def set_mode(self, mode: str) -> "TraceBuilder":
        return self._push("set_mode", mode=mode)

    def set_category(self, name: str) -> "TraceBuilder":
        return self._push("set_category", name=name)

    def camera(self, camera: Camera) -> "TraceBuilder":
        return self._push("camera", camera=camera_to_dict(camera))

    def click(self, px: float, py: float, button: str = "left") -> "TraceBuilder":
        return self._push("click", px=px, py=py, button=button)

    def scroll(self, delta: float) -> "TraceBuilder":
        return self._push("scroll", delta=delta)

    def command(self, name: str) -> "TraceBuilder":
        return self._push("command", name=name)

    def build(self) -> InteractionTrace:
        return InteractionTrace(cloud=self.cloud, events=tuple(self._events))
