"""Core engine for direct 3D bounding-box annotation of point clouds."""

from cloudlabel.geometry import (
    BBox,
    Face,
    Rotate,
    Scale,
    Translate,
    bbox_corners,
    bbox_volume,
    contains_point,
    face_pull,
    iou_3d,
    rotation_matrix,
    transform_bbox,
)

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "Face",
    "Rotate",
    "Scale",
    "Translate",
    "bbox_corners",
    "bbox_volume",
    "contains_point",
    "face_pull",
    "iou_3d",
    "rotation_matrix",
    "transform_bbox",
    "__version__",
]
