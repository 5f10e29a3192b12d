import json
import math

import numpy as np
import pytest

from cloudlabel.cli import run_cli
from cloudlabel.cloud_io import load_cloud
from cloudlabel.config import (
    CONFIG_ENV_VAR,
    Config,
    config_from_dict,
    config_to_dict,
    load_config,
)
from cloudlabel.errors import InvalidConfig, TraceError
from cloudlabel.geometry import BBox
from cloudlabel.label_io import AnnotationSet, export_labels, read_labels, write_labels
from cloudlabel.trace import (
    TraceBuilder,
    replay_trace,
    trace_from_dict,
    trace_to_dict,
)
from scenes import (
    click_pixel,
    floor_and_pillar_points,
    nearest_cloud_point,
    overhead_camera,
    write_scene,
)


@pytest.fixture(scope="module")
def scene(tmp_path_factory):
    folder = tmp_path_factory.mktemp("scene")
    path = write_scene(folder / "room.xyz", floor_and_pillar_points())
    return load_cloud(path)


def spanning_trace(cloud, camera=None):
    camera = camera or overhead_camera()
    picks = [
        nearest_cloud_point(cloud.points, (-1.0, -1.0, 0.0)),
        nearest_cloud_point(cloud.points, (1.0, -1.0, 0.0)),
        nearest_cloud_point(cloud.points, (0.0, 0.2, 0.0)),
        nearest_cloud_point(cloud.points, (0.5, 0.5, 0.6)),  # pillar top
    ]
    builder = TraceBuilder("room.xyz").set_mode("spanning").camera(camera)
    for pick in picks:
        builder.click(*click_pixel(camera, pick))
    return builder.build()


def picking_trace(cloud, camera=None):
    camera = camera or overhead_camera()
    target = nearest_cloud_point(cloud.points, (0.5, 0.5, 0.6))
    return (
        TraceBuilder("room.xyz")
        .set_mode("picking")
        .camera(camera)
        .scroll(1)
        .scroll(1)
        .click(*click_pixel(camera, target))
        .build()
    )


class TestConfig:
    def test_empty_file_gives_defaults(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("")
        assert load_config(path) == Config()

    def test_negative_rotation_step_rejected(self):
        with pytest.raises(InvalidConfig) as err:
            config_from_dict({"steps": {"rotation_deg": -1}})
        assert "steps.rotation_deg" in str(err.value)

    def test_partial_selection_override_merges(self):
        cfg = config_from_dict({"selection": {"smoothing_radius_px": 15}})
        assert cfg.selection.smoothing_radius_px == 15
        assert cfg.selection.minimization_radius_px == 4  # default kept

    def test_unknown_key_rejected(self):
        with pytest.raises(InvalidConfig) as err:
            config_from_dict({"viewer": {"fovdeg": 30}})
        assert "fovdeg" in str(err.value)

    def test_categories_round_trip(self):
        cfg = config_from_dict(
            {"categories": [{"name": "car", "default_dimensions": [4, 1.8, 1.5]}]}
        )
        assert config_from_dict(config_to_dict(cfg)) == cfg

    def test_at_least_one_category(self):
        with pytest.raises(InvalidConfig):
            config_from_dict({"categories": []})

    def test_env_var_override(self, tmp_path, monkeypatch):
        path = tmp_path / "env.json"
        path.write_text(json.dumps({"min_dimension": 0.05}))
        monkeypatch.setenv(CONFIG_ENV_VAR, str(path))
        assert load_config().min_dimension == 0.05

    def test_selection_invariant_enforced(self):
        with pytest.raises(InvalidConfig):
            config_from_dict(
                {"selection": {"smoothing_radius_px": 3, "minimization_radius_px": 5}}
            )


class TestTraceModel:
    def test_dict_round_trip(self, scene):
        trace = spanning_trace(scene)
        assert trace_from_dict(trace_to_dict(trace)) == trace

    def test_timestamps_must_increase(self):
        with pytest.raises(TraceError):
            trace_from_dict(
                {
                    "cloud": "c",
                    "events": [
                        {"t": 5, "type": "scroll", "delta": 1},
                        {"t": 5, "type": "scroll", "delta": 1},
                    ],
                }
            )

    def test_unknown_event_type(self):
        with pytest.raises(TraceError) as err:
            trace_from_dict({"events": [{"t": 1, "type": "teleport"}]})
        assert err.value.index == 0


class TestReplay:
    def test_spanning_four_clicks_one_box(self, scene):
        report = replay_trace(spanning_trace(scene), scene, Config())
        assert len(report.records) == 1
        assert report.interaction_counts == [4]
        box = report.records[0].box
        assert box.length > 0.5 and box.width > 0.5
        assert box.height > 0.1  # pillar supplied real height
        assert report.records[0].wall_time_ms > 0

    def test_picking_scrolls_plus_click(self, scene):
        report = replay_trace(picking_trace(scene), scene, Config())
        assert len(report.records) == 1
        assert report.interaction_counts == [3]
        assert report.records[0].box.rotations[2] == pytest.approx(math.radians(10.0))

    def test_click_before_camera_pose(self, scene):
        trace = TraceBuilder("room.xyz").click(320, 240).build()
        with pytest.raises(TraceError) as err:
            replay_trace(trace, scene, Config())
        assert err.value.index == 0

    def test_scroll_outside_picking(self, scene):
        trace = (
            TraceBuilder("room.xyz")
            .set_mode("spanning")
            .camera(overhead_camera())
            .scroll(1)
            .build()
        )
        with pytest.raises(TraceError):
            replay_trace(trace, scene, Config())

    def test_command_before_any_box(self, scene):
        trace = (
            TraceBuilder("room.xyz")
            .set_mode("picking")
            .camera(overhead_camera())
            .command("move+x")
            .build()
        )
        with pytest.raises(TraceError):
            replay_trace(trace, scene, Config())

    def test_corrections_apply_to_last_box(self, scene):
        camera = overhead_camera()
        target = nearest_cloud_point(scene.points, (0.5, 0.5, 0.6))
        trace = (
            TraceBuilder("room.xyz")
            .set_mode("picking")
            .camera(camera)
            .click(*click_pixel(camera, target))
            .command("move+x")
            .command("move+x")
            .build()
        )
        plain = replay_trace(
            TraceBuilder("room.xyz")
            .set_mode("picking")
            .camera(camera)
            .click(*click_pixel(camera, target))
            .build(),
            scene,
            Config(),
        )
        corrected = replay_trace(trace, scene, Config())
        record = corrected.records[0]
        assert record.corrections == 2
        assert record.interactions == 1
        shift = record.box.center[0] - plain.records[0].box.center[0]
        assert shift == pytest.approx(0.06)

    def test_picking_dimensions_independent_of_camera_distance(self, scene):
        from cloudlabel.viewpoint import Camera

        target = nearest_cloud_point(scene.points, (0.5, 0.5, 0.6))
        boxes = []
        # both poses stay inside the selectable depth envelope (normalized
        # depth < background threshold; ~9.7 m at the default near/far)
        for distance in (5.0, 8.5):
            cam = Camera(
                orbit_target=(0, 0, 0),
                distance=distance,
                azimuth=0.3,
                elevation=1.15,
                viewport=(640, 480),
            )
            trace = (
                TraceBuilder("room.xyz")
                .set_mode("picking")
                .camera(cam)
                .click(*click_pixel(cam, target))
                .build()
            )
            report = replay_trace(trace, scene, Config())
            boxes.append(report.records[0].box)
        # world dimensions stay constant; only apparent size varies with distance
        assert boxes[0].dimensions == boxes[1].dimensions

    def test_mode_switch_resets_draft(self, scene):
        camera = overhead_camera()
        p = nearest_cloud_point(scene.points, (-1.0, -1.0, 0.0))
        trace = (
            TraceBuilder("room.xyz")
            .set_mode("spanning")
            .camera(camera)
            .click(*click_pixel(camera, p))
            .set_mode("picking")
            .set_mode("spanning")
            .build()
        )
        report = replay_trace(trace, scene, Config())
        assert len(report.records) == 0  # partial span dropped cleanly

    def test_replay_deterministic(self, scene):
        trace = spanning_trace(scene)
        cfg = Config()
        first = replay_trace(trace, scene, cfg)
        second = replay_trace(trace, scene, cfg)
        bytes_a = export_labels(first.annotations, "centroid_abs", 8, scene.center_offset)
        bytes_b = export_labels(second.annotations, "centroid_abs", 8, scene.center_offset)
        assert bytes_a == bytes_b
        assert first.annotations == second.annotations

    def test_iou_against_ground_truth(self, scene):
        trace = spanning_trace(scene)
        report = replay_trace(trace, scene, Config())
        gt = AnnotationSet("room", "room.xyz", (report.records[0].box,))
        scored = replay_trace(trace, scene, Config(), ground_truth=gt)
        assert scored.iou_per_box == (1.0,)
        assert scored.mean_iou == 1.0


class TestCli:
    def test_convert_round_trip(self, tmp_path, capsys):
        source = tmp_path / "c.xyz"
        np.savetxt(source, np.random.default_rng(0).uniform(-1, 1, (30, 3)), fmt="%.10g")
        target = tmp_path / "c.pcd"
        assert run_cli(["convert", str(source), str(target)]) == 0
        original = load_cloud(source)
        converted = load_cloud(target)
        assert np.abs(original.points - converted.points).max() < 1e-6

    def test_iou_self_is_one(self, tmp_path, capsys):
        aset = AnnotationSet(
            "s", "s.xyz", (BBox("a", (0, 0, 0), (1, 1, 1), (0, 0, 0.4)),)
        )
        path = tmp_path / "labels.json"
        write_labels(aset, path, "centroid_abs")
        assert run_cli(["iou", str(path), str(path), "--json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["mean_iou"] == 1.0

    def test_labels_convert(self, tmp_path, capsys):
        aset = AnnotationSet(
            "s", "s.xyz", (BBox("a", (1, 2, 0.5), (2, 1, 0.5), (0, 0, 0.3)),)
        )
        src = tmp_path / "in.json"
        write_labels(aset, src, "centroid_rel")
        dst = tmp_path / "out.txt"
        assert run_cli(["labels", str(src), str(dst), "--to", "kitti"]) == 0
        again = read_labels(dst, "kitti")
        assert again.objects[0].center == pytest.approx(aset.objects[0].center)

    def test_validate(self, tmp_path, capsys):
        aset = AnnotationSet("s", "s.xyz", (BBox("a", (0, 0, 0), (1, 1, 1)),))
        path = tmp_path / "v.json"
        write_labels(aset, path, "centroid_abs")
        assert run_cli(["validate", str(path), "--json"]) == 0
        assert json.loads(capsys.readouterr().out)["valid"] is True

    def test_validate_rejects_garbage(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert run_cli(["validate", str(path)]) == 1

    def test_bench(self, tmp_path, capsys):
        path = tmp_path / "b.bin"
        arr = np.random.default_rng(1).uniform(-1, 1, (1000, 4)).astype("<f4")
        arr[:, 3] = 0.5
        path.write_bytes(arr.tobytes())
        assert run_cli(["bench", str(path), "--rasterize", "--json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["points"] == 1000
        assert payload["load_seconds"] > 0

    def test_replay_writes_labels(self, tmp_path, capsys):
        cloud_path = write_scene(tmp_path / "room.xyz", floor_and_pillar_points())
        cloud = load_cloud(cloud_path)
        trace = spanning_trace(cloud)
        trace_path = tmp_path / "trace.json"
        trace_path.write_text(json.dumps(trace_to_dict(trace)))
        out = tmp_path / "labels.json"
        assert run_cli([
            "replay", str(trace_path), "--cloud", str(cloud_path),
            "--out", str(out), "--json",
        ]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["boxes"] == 1
        assert payload["interaction_counts"] == [4]
        assert out.exists()
        assert len(read_labels(out, "centroid_abs", cloud.center_offset).objects) == 1

    def test_missing_file_fails_cleanly(self, tmp_path, capsys):
        assert run_cli(["bench", str(tmp_path / "nope.bin")]) == 1
        assert "error" in capsys.readouterr().err
