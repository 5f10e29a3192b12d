"""Command-line interface.

Subcommands: ``convert`` (cloud to cloud), ``labels`` (label format
conversion), ``iou`` (compare two label files), ``replay`` (trace to labels +
report), ``bench`` (load/rasterize timings), ``validate`` (label schema
check), ``serve`` (start the protocol server). ``--json`` switches reporting
commands to machine-readable output. Any failure exits nonzero with a
message on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from cloudlabel.cloud_io import detect_format_for_write, load_cloud, save_cloud
from cloudlabel.config import load_config
from cloudlabel.errors import CloudLabelError
from cloudlabel.geometry import iou_3d
from cloudlabel.label_io import LABEL_FORMATS, read_labels, write_labels
from cloudlabel.server import make_server, serve_forever
from cloudlabel.trace import load_trace, replay_trace
from cloudlabel.viewpoint import Camera, Rasterizer


def _guess_label_format(path: Path) -> str:
    if path.suffix.lower() == ".txt":
        return "kitti"
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError):
        return "centroid_abs"
    objects = payload.get("objects") or []
    if objects and "vertices" in objects[0]:
        return "vertices"
    if payload.get("frame") == "centered":
        return "centroid_rel"
    return "centroid_abs"


def _cmd_convert(args) -> int:
    cloud = load_cloud(args.input)
    fmt = detect_format_for_write(args.output) if args.format is None else None
    if args.format is not None:
        from cloudlabel.cloud_io import FormatTag

        fmt = FormatTag[args.format.upper()]
    save_cloud(cloud, args.output, fmt)
    print(f"{args.input} -> {args.output} ({len(cloud)} points)")
    return 0


def _cmd_labels(args) -> int:
    in_path = Path(args.input)
    src_fmt = args.from_format or _guess_label_format(in_path)
    offset = tuple(args.offset)
    aset = read_labels(in_path, src_fmt, offset)
    dst_fmt = args.to_format or _guess_label_format(Path(args.output))
    write_labels(aset, args.output, dst_fmt, args.precision, offset)
    print(f"{in_path} ({src_fmt}) -> {args.output} ({dst_fmt}), "
          f"{len(aset.objects)} objects")
    return 0


def _cmd_iou(args) -> int:
    path_a, path_b = Path(args.a), Path(args.b)
    fmt_a = args.format or _guess_label_format(path_a)
    fmt_b = args.format or _guess_label_format(path_b)
    set_a = read_labels(path_a, fmt_a)
    set_b = read_labels(path_b, fmt_b)
    if len(set_a.objects) != len(set_b.objects):
        print(
            f"error: object count mismatch ({len(set_a.objects)} vs "
            f"{len(set_b.objects)}); pairing is by index",
            file=sys.stderr,
        )
        return 1
    rows = []
    for i, (a, b) in enumerate(zip(set_a.objects, set_b.objects)):
        rows.append({"index": i, "a": a.category, "b": b.category,
                     "iou": iou_3d(a, b)})
    mean = sum(r["iou"] for r in rows) / len(rows) if rows else 0.0
    if args.json:
        print(json.dumps({"objects": rows, "mean_iou": mean}))
    else:
        for r in rows:
            print(f"{r['index']:>3}  {r['a']:<16} {r['b']:<16} {r['iou']:.4f}")
        print(f"mean IoU over {len(rows)} objects: {mean:.4f}")
    return 0


def _cmd_replay(args) -> int:
    trace = load_trace(args.trace)
    cloud = load_cloud(args.cloud)
    config = load_config(args.config)
    ground_truth = None
    if args.ground_truth:
        gt_path = Path(args.ground_truth)
        ground_truth = read_labels(gt_path, _guess_label_format(gt_path))
    report = replay_trace(
        trace, cloud, config, ground_truth, cloud_name=Path(args.cloud).stem
    )
    if args.out:
        write_labels(
            report.annotations,
            args.out,
            config.export.format,
            config.export.precision,
            cloud.center_offset,
        )
    summary = {
        "boxes": len(report.records),
        "interaction_counts": report.interaction_counts,
        "corrections": [r.corrections for r in report.records],
        "wall_time_ms": [r.wall_time_ms for r in report.records],
    }
    if report.mean_iou is not None:
        summary["iou_per_box"] = list(report.iou_per_box)
        summary["mean_iou"] = report.mean_iou
    if args.json:
        print(json.dumps(summary))
    else:
        print(f"boxes produced: {summary['boxes']}")
        for i, record in enumerate(report.records):
            line = (f"  box {i}: {record.box.category}, "
                    f"{record.interactions} interactions, "
                    f"{record.corrections} corrections, "
                    f"{record.wall_time_ms:.0f} ms")
            if report.iou_per_box is not None:
                line += f", IoU {report.iou_per_box[i]:.3f}"
            print(line)
        if report.mean_iou is not None:
            print(f"mean IoU: {report.mean_iou:.4f}")
    return 0


def _cmd_bench(args) -> int:
    start = time.perf_counter()
    cloud = load_cloud(args.cloud)
    load_seconds = time.perf_counter() - start
    result = {
        "points": len(cloud),
        "load_seconds": load_seconds,
        "points_per_second": len(cloud) / load_seconds if load_seconds > 0 else 0.0,
    }
    if args.rasterize:
        raster = Rasterizer(cloud)
        camera = Camera(distance=float(np.abs(cloud.points).max() * 2.0 + 1.0))
        start = time.perf_counter()
        raster.depth_buffer(camera)
        result["rasterize_seconds"] = time.perf_counter() - start
    if args.json:
        print(json.dumps(result))
    else:
        print(f"points:      {result['points']}")
        print(f"load time:   {result['load_seconds']:.3f} s")
        print(f"throughput:  {result['points_per_second']:.0f} points/s")
        if "rasterize_seconds" in result:
            print(f"rasterize:   {result['rasterize_seconds']:.3f} s")
    return 0


def _cmd_validate(args) -> int:
    path = Path(args.labels)
    fmt = args.format or _guess_label_format(path)
    aset = read_labels(path, fmt)
    config = load_config(args.config) if args.config else None
    warnings = []
    if config is not None:
        from cloudlabel.label_io import category_warnings

        warnings = category_warnings(aset, config.category_names)
    result = {
        "format": fmt,
        "objects": len(aset.objects),
        "warnings": warnings,
        "valid": True,
    }
    if args.json:
        print(json.dumps(result))
    else:
        print(f"{path}: valid {fmt} labels, {len(aset.objects)} objects")
        for warning in warnings:
            print(f"  warning: {warning}")
    return 0


def _cmd_serve(args) -> int:
    config = load_config(args.config)
    labels = args.labels or str(Path(args.folder) / "labels")
    server = make_server(
        args.folder, labels, config, port=args.port, ui_dir=args.ui, quiet=False
    )
    host, port = server.server_address
    print(
        f"serving {args.folder} on http://{host}:{port} (labels in {labels})",
        flush=True,
    )
    serve_forever(server)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cloudlabel",
        description="Point-cloud bounding-box annotation core.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert a point cloud between formats")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--format", help="explicit target format tag (e.g. pcd_ascii)")
    p.set_defaults(func=_cmd_convert)

    p = sub.add_parser("labels", help="convert a label file between formats")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--from", dest="from_format", choices=LABEL_FORMATS)
    p.add_argument("--to", dest="to_format", choices=LABEL_FORMATS)
    p.add_argument("--precision", type=int, default=8)
    p.add_argument("--offset", type=float, nargs=3, default=(0.0, 0.0, 0.0),
                   metavar=("X", "Y", "Z"),
                   help="cloud center offset for absolute/relative conversion")
    p.set_defaults(func=_cmd_labels)

    p = sub.add_parser("iou", help="per-object and mean IoU of two label files")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--format", choices=LABEL_FORMATS)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_iou)

    p = sub.add_parser("replay", help="replay an interaction trace headlessly")
    p.add_argument("trace")
    p.add_argument("--cloud", required=True)
    p.add_argument("--config")
    p.add_argument("--out", help="write produced labels here")
    p.add_argument("--ground-truth")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("bench", help="load (and optionally rasterize) timings")
    p.add_argument("cloud")
    p.add_argument("--rasterize", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("validate", help="check a label file parses and is sane")
    p.add_argument("labels")
    p.add_argument("--format", choices=LABEL_FORMATS)
    p.add_argument("--config")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("serve", help="start the local annotation service")
    p.add_argument("--folder", required=True)
    p.add_argument("--labels")
    p.add_argument("--config")
    p.add_argument("--port", type=int, default=8756)
    p.add_argument("--ui", help="directory with a built browser UI to serve")
    p.set_defaults(func=_cmd_serve)

    return parser


def run_cli(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CloudLabelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:  # console entry point
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
