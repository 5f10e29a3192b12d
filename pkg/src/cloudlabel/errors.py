"""Exception hierarchy shared across the package.

``MalformedHeader`` and ``InconsistentCounts`` subclass ``MalformedFile`` so
that callers guarding against broken input files can catch one type.
"""

from __future__ import annotations


class CloudLabelError(Exception):
    """Base class for every error raised by this package."""


# --- point cloud I/O ---------------------------------------------------------


class CloudIoError(CloudLabelError):
    pass


class UnsupportedFormat(CloudIoError):
    """File extension does not map to a supported point cloud format."""


class MalformedFile(CloudIoError):
    """File contents cannot be parsed as the detected format."""


class MalformedHeader(MalformedFile):
    """Header contradicts the extension or is unreadable."""


class InconsistentCounts(MalformedFile):
    """Declared point count does not match the number of records present."""


class IoFailure(CloudIoError):
    """Underlying filesystem operation failed."""


class DegeneratePlane(CloudLabelError):
    """Floor-alignment picks are collinear; no plane is defined."""


class LossyWriteWarning(UserWarning):
    """Target format cannot represent all channels; data was dropped."""


# --- viewpoint / selection ---------------------------------------------------


class BackgroundDepth(CloudLabelError):
    """Unprojection requested for a background depth value."""


class NoPointNearClick(CloudLabelError):
    """No point within the smoothing radius of the click."""


# --- labeling modes ----------------------------------------------------------


class DegenerateSpan(CloudLabelError):
    """Second span point coincides with the first in the horizontal plane."""


class IncompleteSpan(CloudLabelError):
    """Finalize requested before all four span points were picked."""


# --- label I/O ---------------------------------------------------------------


class LabelIoError(CloudLabelError):
    pass


class MalformedLabelFile(LabelIoError):
    pass


class AmbiguousVertices(LabelIoError):
    """Eight corners are not box-shaped within tolerance."""


class UnrepresentableRotation(LabelIoError):
    """Target label format encodes yaw only, but the box has roll/pitch."""


# --- session -----------------------------------------------------------------


class InvalidConfig(CloudLabelError):
    """Configuration value failed validation.

    ``key_path`` points at the offending entry, e.g. ``"steps.rotation_deg"``.
    """

    def __init__(self, key_path: str, reason: str):
        super().__init__(f"{key_path}: {reason}")
        self.key_path = key_path
        self.reason = reason


class TraceError(CloudLabelError):
    """Interaction trace event illegal in the current replay state."""

    def __init__(self, index: int, reason: str):
        super().__init__(f"event {index}: {reason}")
        self.index = index
        self.reason = reason
