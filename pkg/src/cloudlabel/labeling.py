"""Box-creation state machines (picking, spanning) and stepwise correction.

Both creation modes sit behind one small interface so a session can drive
whichever is active without knowing which: feed clicks and scrolls in, ask
for a preview, finalize when complete. Picking drops a fixed-size default
box at the clicked 3D point (yaw via scroll); spanning constructs all nine
geometric parameters from four clicks, locking depth from the third pick
and height from the fourth.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from cloudlabel.errors import DegenerateSpan, IncompleteSpan
from cloudlabel.geometry import (
    MIN_DIMENSION,
    BBox,
    Face,
    Rotate,
    Scale,
    Translate,
    face_pull,
    normalize_angle,
    transform_bbox,
)

DEFAULT_YAW_STEP = math.radians(5.0)  # picking scroll, per notch


@dataclass(frozen=True)
class StepSizes:
    """Key/button correction increments."""

    translation: float = 0.03
    rotation_deg: float = 5.0
    scaling: float = 0.03

    def __post_init__(self):
        if min(self.translation, self.rotation_deg, self.scaling) <= 0:
            raise ValueError("step sizes must be positive")


class LabelingMethod(abc.ABC):
    """Uniform interface every box-creation mode implements."""

    @abc.abstractmethod
    def register_click(self, point: Sequence[float]) -> None:
        """Feed one successful 3D selection into the draft."""

    @abc.abstractmethod
    def register_scroll(self, delta: float) -> None:
        """Feed one scroll notch; modes without scroll semantics ignore it."""

    @abc.abstractmethod
    def preview(self) -> Optional[BBox]:
        """Current draft as a box, or None; never mutates state."""

    @abc.abstractmethod
    def is_complete(self) -> bool:
        ...

    @abc.abstractmethod
    def finalize(self) -> BBox:
        """Materialize the draft; only legal when :meth:`is_complete`."""

    @abc.abstractmethod
    def reset(self) -> None:
        """Drop any partial draft."""


class PickingMethod(LabelingMethod):
    """Place a default-dimension box at the clicked point, yaw by scroll.

    The box keeps constant world dimensions; placing it at the true selected
    depth is what makes far objects appear smaller. The accumulated yaw
    survives finalize so consecutive boxes share the orientation.
    """

    def __init__(
        self,
        category: str,
        default_dimensions: Sequence[float],
        yaw_step: float = DEFAULT_YAW_STEP,
        min_dimension: float = MIN_DIMENSION,
    ):
        dims = tuple(float(d) for d in default_dimensions)
        if min(dims) < min_dimension:
            raise ValueError(f"default dimensions {dims} below {min_dimension}")
        self.category = category
        self.default_dimensions = dims
        self.yaw_step = yaw_step
        self.z_rotation = 0.0
        self._hover: Optional[tuple[float, float, float]] = None
        self._committed: Optional[tuple[float, float, float]] = None

    def _box_at(self, point) -> BBox:
        return BBox(
            category=self.category,
            center=tuple(float(c) for c in point),
            dimensions=self.default_dimensions,
            rotations=(0.0, 0.0, self.z_rotation),
        )

    def update_hover(self, point: Sequence[float]) -> None:
        self._hover = tuple(float(c) for c in point)

    def register_click(self, point: Sequence[float]) -> None:
        self._committed = tuple(float(c) for c in point)

    def register_scroll(self, delta: float) -> None:
        self.z_rotation = normalize_angle(self.z_rotation + delta * self.yaw_step)

    def preview(self) -> Optional[BBox]:
        point = self._committed if self._committed is not None else self._hover
        return self._box_at(point) if point is not None else None

    def is_complete(self) -> bool:
        return self._committed is not None

    def finalize(self) -> BBox:
        if self._committed is None:
            raise IncompleteSpan("picking has no committed click")
        box = self._box_at(self._committed)
        self._committed = None
        self._hover = None
        return box

    def reset(self) -> None:
        self._committed = None
        self._hover = None


def span_box(
    p1: Sequence[float],
    p2: Sequence[float],
    signed_width: float,
    top_z: float,
    category: str,
    min_dimension: float = MIN_DIMENSION,
) -> BBox:
    """Assemble the box the four spanning picks describe.

    ``p1``/``p2`` fix the base edge (yaw + length), ``signed_width`` is the
    third pick's perpendicular horizontal offset from that edge (its sign
    picks the side), ``top_z`` is the fourth pick's height cue. The base
    plane sits at min(p1.z, p2.z) so both picked vertices are enclosed.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    edge = p2[:2] - p1[:2]
    length = float(np.linalg.norm(edge))
    if length <= 1e-6:
        raise DegenerateSpan(f"first two picks coincide horizontally ({length:.2e} m)")
    u = edge / length
    yaw = math.atan2(u[1], u[0])
    width = abs(signed_width)
    side = 1.0 if signed_width >= 0 else -1.0
    length = max(length, min_dimension)
    width = max(width, min_dimension)
    z0 = min(float(p1[2]), float(p2[2]))
    height = max(top_z - z0, min_dimension)
    perp = np.array([-u[1], u[0]])  # left of u; positive cross2d side
    center_xy = p1[:2] + (length / 2.0) * u + (width / 2.0) * side * perp
    return BBox(
        category=category,
        center=(float(center_xy[0]), float(center_xy[1]), z0 + height / 2.0),
        dimensions=(length, width, height),
        rotations=(0.0, 0.0, yaw),
    )


class SpanningMethod(LabelingMethod):
    """Four clicks -> nine geometric parameters.

    Picks one and two are kept whole (base edge). From pick three only the
    perpendicular horizontal offset to the edge survives; from pick four only
    the z value. The locking means picks three and four may lie anywhere that
    represents the desired depth or height, not necessarily on the object.
    """

    def __init__(
        self,
        category: str,
        min_dimension: float = MIN_DIMENSION,
    ):
        self.category = category
        self.min_dimension = min_dimension
        self._p1: Optional[np.ndarray] = None
        self._p2: Optional[np.ndarray] = None
        self._signed_width: Optional[float] = None
        self._top_z: Optional[float] = None

    @property
    def index(self) -> int:
        states = (self._p1, self._p2, self._signed_width, self._top_z)
        count = 0
        for value in states:
            if value is None:
                break
            count += 1
        return count

    def register_click(self, point: Sequence[float]) -> None:
        p = np.asarray(point, dtype=float)
        idx = self.index
        if idx == 0:
            self._p1 = p
        elif idx == 1:
            if np.linalg.norm(p[:2] - self._p1[:2]) <= 1e-6:
                raise DegenerateSpan("second pick coincides with the first")
            self._p2 = p
        elif idx == 2:
            u = self._p2[:2] - self._p1[:2]
            u = u / np.linalg.norm(u)
            rel = p[:2] - self._p1[:2]
            self._signed_width = float(u[0] * rel[1] - u[1] * rel[0])
        elif idx == 3:
            self._top_z = float(p[2])
        else:
            raise IncompleteSpan("span already has four points; finalize or reset")

    def register_scroll(self, delta: float) -> None:
        pass  # spanning has no scroll semantics

    def preview(self) -> Optional[BBox]:
        idx = self.index
        if idx < 2:
            return None
        signed_width = self._signed_width if idx >= 3 else self.min_dimension
        if idx >= 4:
            top_z = self._top_z
        else:
            top_z = min(float(self._p1[2]), float(self._p2[2]))
        return span_box(
            self._p1, self._p2, signed_width, top_z, self.category, self.min_dimension
        )

    def is_complete(self) -> bool:
        return self.index == 4

    def finalize(self) -> BBox:
        if not self.is_complete():
            raise IncompleteSpan(f"span has {self.index} of 4 points")
        box = span_box(
            self._p1,
            self._p2,
            self._signed_width,
            self._top_z,
            self.category,
            self.min_dimension,
        )
        self.reset()
        return box

    def reset(self) -> None:
        self._p1 = None
        self._p2 = None
        self._signed_width = None
        self._top_z = None


# --- keyboard/button correction commands -----------------------------------------

_FACES = {face.name.lower(): face for face in Face}


def adjust_bbox(
    box: BBox,
    command: str,
    steps: StepSizes = StepSizes(),
    min_dimension: float = MIN_DIMENSION,
) -> BBox:
    """Apply one named correction step to a box.

    Commands follow ``<verb><sign><arg>``: ``move+x``/``move-z`` translate by
    the translation step, ``rotate+z`` rotates about a world axis by the
    rotation step, ``scale+length`` grows one dimension by the scaling step,
    ``pull+front``/``pull-front`` push or pull a face by the scaling step.
    """
    verb, sign, arg = _parse_command(command)
    if verb == "move":
        delta = [0.0, 0.0, 0.0]
        delta["xyz".index(arg)] = sign * steps.translation
        return transform_bbox(box, Translate(tuple(delta)), min_dimension).box
    if verb == "rotate":
        angle = sign * math.radians(steps.rotation_deg)
        return transform_bbox(box, Rotate(arg, angle), min_dimension).box
    if verb == "scale":
        return transform_bbox(
            box, Scale(arg, sign * steps.scaling), min_dimension
        ).box
    if verb == "pull":
        return face_pull(box, _FACES[arg], sign * steps.scaling, min_dimension).box
    raise ValueError(f"unknown command verb {verb!r}")


def _parse_command(command: str) -> tuple[str, float, str]:
    for sep, sign in (("+", 1.0), ("-", -1.0)):
        if sep in command:
            verb, arg = command.split(sep, 1)
            verb, arg = verb.strip().lower(), arg.strip().lower()
            valid = {
                "move": set("xyz"),
                "rotate": set("xyz"),
                "scale": {"length", "width", "height"},
                "pull": set(_FACES),
            }
            if verb not in valid:
                raise ValueError(f"unknown command verb {verb!r} in {command!r}")
            if arg not in valid[verb]:
                raise ValueError(f"bad argument {arg!r} for {verb!r} in {command!r}")
            return verb, sign, arg
    raise ValueError(f"command {command!r} must contain '+' or '-'")
