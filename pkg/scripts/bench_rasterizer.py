#!/usr/bin/env python3
"""Load/rasterize timing sweep across point counts.

Answers two operational questions: how fast do BIN files of various sizes
load, and what frame rate does the software rasterizer sustain once the
cloud is uploaded (per-frame work = matrix only). Run:

    python3 scripts/bench_rasterizer.py --counts 100000 1000000 5000000
"""

import argparse
import tempfile
import time
from pathlib import Path

import numpy as np

from cloudlabel.cloud_io import load_cloud
from cloudlabel.viewpoint import Camera, Orbit, Rasterizer, navigate


def bench_count(count: int, frames: int, point_size: int) -> dict:
    rng = np.random.default_rng(count)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "bench.bin"
        block = rng.uniform(-30, 30, size=(count, 4)).astype("<f4")
        block[:, 3] = 0.5
        path.write_bytes(block.tobytes())
        del block

        start = time.perf_counter()
        cloud = load_cloud(path)
        load_s = time.perf_counter() - start

    raster = Rasterizer(cloud)
    camera = Camera(distance=80.0, viewport=(1280, 720))
    raster.depth_buffer(camera, point_size)  # warm-up frame
    start = time.perf_counter()
    for i in range(frames):
        camera = navigate(camera, Orbit(15, 3))
        raster.depth_buffer(camera, point_size)
    frame_s = (time.perf_counter() - start) / frames
    return {
        "points": count,
        "load_s": load_s,
        "load_rate": count / load_s,
        "frame_s": frame_s,
        "fps": 1.0 / frame_s,
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--counts", type=int, nargs="+",
        default=[100_000, 500_000, 1_000_000, 5_000_000],
    )
    parser.add_argument("--frames", type=int, default=5)
    parser.add_argument("--point-size", type=int, default=4)
    args = parser.parse_args()

    print(f"{'points':>12} {'load [s]':>10} {'Mpts/s':>8} {'frame [s]':>10} {'fps':>7}")
    for count in args.counts:
        r = bench_count(count, args.frames, args.point_size)
        print(
            f"{r['points']:>12,} {r['load_s']:>10.3f} "
            f"{r['load_rate'] / 1e6:>8.1f} {r['frame_s']:>10.3f} {r['fps']:>7.1f}"
        )


if __name__ == "__main__":
    main()
