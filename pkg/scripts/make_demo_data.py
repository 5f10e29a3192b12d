#!/usr/bin/env python3
"""Generate a demo dataset: synthetic room scans plus a matching config.

Creates clouds in several formats under <out>/clouds so the full format
matrix is exercised, and writes <out>/config.json with categories sized for
the generated objects. Point the server at the result:

    python3 scripts/make_demo_data.py demo/
    cloudlabel serve --folder demo/clouds --config demo/config.json
"""

import argparse
import json
from pathlib import Path

import numpy as np

from cloudlabel.cloud_io import FormatTag, PointCloud, save_cloud


def box_surface(rng, center, dims, yaw, density=900):
    """Sample points on the surface of an axis-yawed box."""
    half = np.asarray(dims) / 2.0
    points = []
    for axis in range(3):
        for sign in (-1.0, 1.0):
            count = max(int(density * half[(axis + 1) % 3] * half[(axis + 2) % 3]), 8)
            face = rng.uniform(-1, 1, size=(count, 3)) * half
            face[:, axis] = sign * half[axis]
            points.append(face)
    local = np.vstack(points)
    c, s = np.cos(yaw), np.sin(yaw)
    rot = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    return local @ rot.T + np.asarray(center)


def room_scene(rng, extent=4.0, objects=3):
    floor_n = 14000
    floor = np.column_stack(
        [
            rng.uniform(-extent, extent, floor_n),
            rng.uniform(-extent, extent, floor_n),
            rng.normal(0.0, 0.004, floor_n),
        ]
    )
    parts = [floor]
    truth = []
    for _ in range(objects):
        dims = rng.uniform([0.4, 0.4, 0.3], [1.2, 1.0, 0.9])
        center = np.array(
            [rng.uniform(-2.5, 2.5), rng.uniform(-2.5, 2.5), dims[2] / 2]
        )
        yaw = rng.uniform(-np.pi, np.pi)
        parts.append(box_surface(rng, center, dims, yaw))
        truth.append(
            {
                "name": "crate",
                "center": center.tolist(),
                "dimensions": dims.tolist(),
                "yaw_deg": float(np.degrees(yaw)),
            }
        )
    points = np.vstack(parts)
    shade = 0.35 + 0.5 * (points[:, 2] / max(points[:, 2].max(), 1e-9))
    colors = np.column_stack([shade, shade * 0.9, shade * 0.8]).clip(0, 1)
    return points, colors, truth


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", help="output folder")
    parser.add_argument("--scenes", type=int, default=4)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    out = Path(args.out)
    clouds = out / "clouds"
    clouds.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)

    formats = [FormatTag.XYZ, FormatTag.PLY_BINARY, FormatTag.PCD_BINARY, FormatTag.BIN]
    ground_truth = {}
    for i in range(args.scenes):
        points, colors, truth = room_scene(rng)
        tag = formats[i % len(formats)]
        cloud = PointCloud(
            points=points,
            colors=colors if tag.supports_colors else None,
        )
        name = f"room_{i:02d}{tag.extension}"
        save_cloud(cloud, clouds / name, tag)
        ground_truth[name] = truth
        print(f"wrote {clouds / name} ({len(points)} points, {tag.value})")

    (out / "ground_truth.json").write_text(json.dumps(ground_truth, indent=2))
    config = {
        "categories": [
            {"name": "crate", "color": "#e8463b", "default_dimensions": [0.8, 0.7, 0.6]},
            {"name": "pallet", "color": "#3b82e8", "default_dimensions": [1.2, 0.8, 0.15]},
        ],
        "export": {"format": "centroid_abs", "precision": 8},
    }
    (out / "config.json").write_text(json.dumps(config, indent=2))
    print(f"wrote {out / 'config.json'} and ground_truth.json")


if __name__ == "__main__":
    main()
