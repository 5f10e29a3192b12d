"""Synthetic scene + trace construction shared by session/acceptance tests."""

from __future__ import annotations

import numpy as np

from cloudlabel.viewpoint import Camera, project


def floor_and_pillar_points(spacing=0.05, extent=2.0, pillar=(0.5, 0.5, 0.6)):
    """A dense floor grid at z=0 plus a vertical pillar of points."""
    axis = np.arange(-extent, extent + spacing / 2, spacing)
    gx, gy = np.meshgrid(axis, axis)
    floor = np.column_stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)])
    px, py, ph = pillar
    zs = np.arange(0.0, ph + spacing / 2, spacing)
    column = np.column_stack([np.full_like(zs, px), np.full_like(zs, py), zs])
    return np.vstack([floor, column])


def write_scene(path, points):
    np.savetxt(path, points, fmt="%.10g")
    return path


def overhead_camera(viewport=(640, 480), distance=7.0):
    """Steep look-down pose that keeps the whole floor in view."""
    return Camera(
        orbit_target=(0.0, 0.0, 0.0),
        distance=distance,
        azimuth=0.3,
        elevation=1.15,
        viewport=viewport,
    )


def click_pixel(camera, world_point):
    """Integer pixel for a click landing on a world point's splat."""
    hit = project(camera, world_point)
    assert hit is not None, f"{world_point} not projectable"
    px, py, _ = hit
    return float(int(px)), float(int(py))


def nearest_cloud_point(points, target):
    """The cloud point closest to a nominal pick location."""
    points = np.asarray(points)
    idx = int(np.argmin(np.linalg.norm(points - np.asarray(target), axis=1)))
    return points[idx]
