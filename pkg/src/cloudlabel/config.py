"""Session configuration with JSON loading, deep defaults, and validation.

Every key is optional in the file; absent keys take the defaults below.
Unknown keys are rejected so typos surface instead of silently reverting to
defaults. The ``LABELCLOUD_CONFIG`` environment variable supplies the config
path when none is given explicitly.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from cloudlabel.errors import InvalidConfig
from cloudlabel.label_io import DEFAULT_PRECISION, LABEL_FORMATS
from cloudlabel.labeling import StepSizes
from cloudlabel.selection import SelectionParams

CONFIG_ENV_VAR = "LABELCLOUD_CONFIG"


@dataclass(frozen=True)
class CategoryConfig:
    name: str
    color: str = "#e8463b"
    default_dimensions: tuple[float, float, float] = (0.5, 0.5, 0.5)


@dataclass(frozen=True)
class ViewerConfig:
    fov_deg: float = 45.0
    near: float = 0.01
    far: float = 300.0
    point_size_px: int = 4
    zoom_base: float = 0.9


@dataclass(frozen=True)
class ExportConfig:
    format: str = "centroid_abs"
    precision: int = DEFAULT_PRECISION


@dataclass(frozen=True)
class Config:
    categories: tuple[CategoryConfig, ...] = (CategoryConfig("object"),)
    steps: StepSizes = field(default_factory=StepSizes)
    selection: SelectionParams = field(default_factory=SelectionParams)
    viewer: ViewerConfig = field(default_factory=ViewerConfig)
    export: ExportConfig = field(default_factory=ExportConfig)
    min_dimension: float = 0.01

    def category(self, name: str) -> Optional[CategoryConfig]:
        for cat in self.categories:
            if cat.name == name:
                return cat
        return None

    @property
    def category_names(self) -> list[str]:
        return [c.name for c in self.categories]


def _check(condition: bool, key_path: str, reason: str):
    if not condition:
        raise InvalidConfig(key_path, reason)


def _number(value, key_path) -> float:
    _check(isinstance(value, (int, float)) and not isinstance(value, bool),
           key_path, f"expected a number, got {value!r}")
    _check(math.isfinite(float(value)), key_path, "must be finite")
    return float(value)


def _positive(value, key_path) -> float:
    num = _number(value, key_path)
    _check(num > 0, key_path, f"must be > 0, got {num}")
    return num


def _int(value, key_path) -> int:
    _check(isinstance(value, int) and not isinstance(value, bool),
           key_path, f"expected an integer, got {value!r}")
    return value


def _reject_unknown(data: dict, allowed: set[str], where: str):
    for key in data:
        _check(key in allowed, f"{where}.{key}" if where else key, "unknown key")


def _category_from_dict(data, index: int) -> CategoryConfig:
    where = f"categories[{index}]"
    _check(isinstance(data, dict), where, "expected an object")
    _reject_unknown(data, {"name", "color", "default_dimensions"}, where)
    _check("name" in data and isinstance(data["name"], str) and data["name"],
           f"{where}.name", "category name required")
    defaults = CategoryConfig(name=data["name"])
    color = data.get("color", defaults.color)
    _check(isinstance(color, str), f"{where}.color", "expected a string")
    dims = data.get("default_dimensions", defaults.default_dimensions)
    _check(isinstance(dims, (list, tuple)) and len(dims) == 3,
           f"{where}.default_dimensions", "expected 3 numbers")
    dims = tuple(_positive(d, f"{where}.default_dimensions") for d in dims)
    return CategoryConfig(name=data["name"], color=color, default_dimensions=dims)


def config_from_dict(data: dict) -> Config:
    """Build a Config from a (partial) dict, validating every value."""
    _check(isinstance(data, dict), "", "config root must be an object")
    _reject_unknown(
        data,
        {"categories", "steps", "selection", "viewer", "export", "min_dimension"},
        "",
    )
    defaults = Config()

    categories = defaults.categories
    if "categories" in data:
        raw = data["categories"]
        _check(isinstance(raw, list) and len(raw) >= 1,
               "categories", "need at least one category")
        categories = tuple(_category_from_dict(c, i) for i, c in enumerate(raw))

    steps = defaults.steps
    if "steps" in data:
        raw = data["steps"]
        _check(isinstance(raw, dict), "steps", "expected an object")
        _reject_unknown(raw, {"translation", "rotation_deg", "scaling"}, "steps")
        steps = StepSizes(
            translation=_positive(raw.get("translation", steps.translation),
                                  "steps.translation"),
            rotation_deg=_positive(raw.get("rotation_deg", steps.rotation_deg),
                                   "steps.rotation_deg"),
            scaling=_positive(raw.get("scaling", steps.scaling), "steps.scaling"),
        )

    selection = defaults.selection
    if "selection" in data:
        raw = data["selection"]
        _check(isinstance(raw, dict), "selection", "expected an object")
        _reject_unknown(
            raw,
            {"smoothing_radius_px", "minimization_radius_px", "background_threshold"},
            "selection",
        )
        smoothing = raw.get("smoothing_radius_px", selection.smoothing_radius_px)
        minimization = raw.get(
            "minimization_radius_px", selection.minimization_radius_px
        )
        threshold = raw.get("background_threshold", selection.background_threshold)
        _int(smoothing, "selection.smoothing_radius_px")
        _int(minimization, "selection.minimization_radius_px")
        _number(threshold, "selection.background_threshold")
        try:
            selection = SelectionParams(
                smoothing_radius_px=smoothing,
                minimization_radius_px=minimization,
                background_threshold=threshold,
            )
        except ValueError as exc:
            raise InvalidConfig("selection", str(exc)) from exc

    viewer = defaults.viewer
    if "viewer" in data:
        raw = data["viewer"]
        _check(isinstance(raw, dict), "viewer", "expected an object")
        _reject_unknown(
            raw, {"fov_deg", "near", "far", "point_size_px", "zoom_base"}, "viewer"
        )
        fov = _positive(raw.get("fov_deg", viewer.fov_deg), "viewer.fov_deg")
        _check(fov < 180.0, "viewer.fov_deg", "must be < 180")
        near = _positive(raw.get("near", viewer.near), "viewer.near")
        far = _positive(raw.get("far", viewer.far), "viewer.far")
        _check(near < far, "viewer.far", f"far ({far}) must exceed near ({near})")
        point_size = raw.get("point_size_px", viewer.point_size_px)
        _check(_int(point_size, "viewer.point_size_px") >= 1,
               "viewer.point_size_px", "must be >= 1")
        zoom_base = _positive(raw.get("zoom_base", viewer.zoom_base), "viewer.zoom_base")
        _check(zoom_base != 1.0, "viewer.zoom_base", "must differ from 1.0")
        viewer = ViewerConfig(fov, near, far, point_size, zoom_base)

    export = defaults.export
    if "export" in data:
        raw = data["export"]
        _check(isinstance(raw, dict), "export", "expected an object")
        _reject_unknown(raw, {"format", "precision"}, "export")
        fmt = raw.get("format", export.format)
        _check(fmt in LABEL_FORMATS, "export.format",
               f"must be one of {LABEL_FORMATS}, got {fmt!r}")
        precision = raw.get("precision", export.precision)
        _check(0 <= _int(precision, "export.precision") <= 17,
               "export.precision", "must be in [0, 17]")
        export = ExportConfig(format=fmt, precision=precision)

    min_dimension = defaults.min_dimension
    if "min_dimension" in data:
        min_dimension = _positive(data["min_dimension"], "min_dimension")

    return Config(
        categories=categories,
        steps=steps,
        selection=selection,
        viewer=viewer,
        export=export,
        min_dimension=min_dimension,
    )


def config_to_dict(config: Config) -> dict:
    return {
        "categories": [
            {
                "name": c.name,
                "color": c.color,
                "default_dimensions": list(c.default_dimensions),
            }
            for c in config.categories
        ],
        "steps": {
            "translation": config.steps.translation,
            "rotation_deg": config.steps.rotation_deg,
            "scaling": config.steps.scaling,
        },
        "selection": {
            "smoothing_radius_px": config.selection.smoothing_radius_px,
            "minimization_radius_px": config.selection.minimization_radius_px,
            "background_threshold": config.selection.background_threshold,
        },
        "viewer": {
            "fov_deg": config.viewer.fov_deg,
            "near": config.viewer.near,
            "far": config.viewer.far,
            "point_size_px": config.viewer.point_size_px,
            "zoom_base": config.viewer.zoom_base,
        },
        "export": {
            "format": config.export.format,
            "precision": config.export.precision,
        },
        "min_dimension": config.min_dimension,
    }


def load_config(path=None) -> Config:
    """Load a config file; None falls back to $LABELCLOUD_CONFIG, then defaults.

    An empty or whitespace-only file means "all defaults".
    """
    if path is None:
        env = os.environ.get(CONFIG_ENV_VAR, "").strip()
        if not env:
            return Config()
        path = env
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InvalidConfig(str(path), f"cannot read config: {exc}") from exc
    if not text.strip():
        return Config()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidConfig(str(path), f"not valid JSON: {exc}") from exc
    return config_from_dict(data)
