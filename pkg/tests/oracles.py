"""Independent test oracles. Nothing in here calls the code paths it checks."""

from __future__ import annotations

import math

import numpy as np


def mc_iou(box_a, box_b, samples: int = 1_000_000, seed: int = 0) -> float:
    """Monte-Carlo IoU: uniform samples over the joint corner AABB.

    Containment is evaluated from scratch (own rotation matrices applied to
    the sample block), independent of the library's corner/contains code.
    """
    rng = np.random.default_rng(seed)

    def own_rotation(roll, pitch, yaw):
        cr, sr = math.cos(roll), math.sin(roll)
        cp, sp = math.cos(pitch), math.sin(pitch)
        cy, sy = math.cos(yaw), math.sin(yaw)
        rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
        ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
        rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
        return rz @ ry @ rx

    def own_corners(box):
        rot = own_rotation(*box.rotations)
        half = np.asarray(box.dimensions) / 2.0
        offsets = np.array(
            [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)]
        )
        return np.asarray(box.center) + (offsets * half) @ rot.T

    def inside(box, pts):
        rot = own_rotation(*box.rotations)
        local = (pts - np.asarray(box.center)) @ rot
        return np.all(np.abs(local) <= np.asarray(box.dimensions) / 2.0, axis=1)

    corners = np.vstack([own_corners(box_a), own_corners(box_b)])
    lo, hi = corners.min(axis=0), corners.max(axis=0)
    pts = rng.uniform(lo, hi, size=(samples, 3))
    in_a = inside(box_a, pts)
    in_b = inside(box_b, pts)
    n_union = int(np.count_nonzero(in_a | in_b))
    if n_union == 0:
        return 0.0
    return int(np.count_nonzero(in_a & in_b)) / n_union


def scan_select_depth(depths, cx, cy, smoothing_radius, minimization_radius, threshold):
    """Exhaustive-scan twin of the click-depth heuristic.

    Walks every pixel of the buffer, applies the two documented rules
    (minimum within the small radius on a hit, mean of non-background within
    the large radius on a miss) and returns the selected depth or None.
    """
    height = len(depths)
    width = len(depths[0])

    def hits(radius):
        found = []
        for y in range(height):
            for x in range(width):
                if (x - cx) ** 2 + (y - cy) ** 2 <= radius * radius:
                    value = depths[y][x]
                    if value < threshold:
                        found.append(value)
        return found

    if depths[cy][cx] < threshold:
        return min(hits(minimization_radius))
    smoothed = hits(smoothing_radius)
    if smoothed:
        return math.fsum(smoothed) / len(smoothed)
    return None
