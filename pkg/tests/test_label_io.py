import json
import math
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from cloudlabel.errors import (
    AmbiguousVertices,
    IoFailure,
    MalformedLabelFile,
    UnrepresentableRotation,
)
from cloudlabel.geometry import BBox, bbox_corners
from cloudlabel.label_io import (
    LABEL_FORMATS,
    AnnotationSet,
    box_from_corners,
    category_warnings,
    export_labels,
    import_labels,
    read_labels,
    scan_progress,
    write_labels,
)

SCHEMA_DIR = Path(__file__).resolve().parents[1] / "docs" / "schemas"


def sample_set(yaw_only=False):
    boxes = [
        BBox("chair", (1.0, 2.0, 0.5), (2.0, 1.0, 0.5), (0.0, 0.0, math.radians(30))),
        BBox("table", (-0.5, 0.25, 0.75), (1.5, 0.8, 0.7), (0.0, 0.0, -1.0)),
    ]
    if not yaw_only:
        boxes.append(
            BBox("lamp", (0.0, -1.0, 1.2), (0.2, 0.2, 1.1), (0.15, -0.2, 2.5))
        )
    return AnnotationSet("scene", "clouds/scene.xyz", tuple(boxes))


def boxes_close(a: BBox, b: BBox, tol=1e-6):
    import cloudlabel.geometry as geom

    return (
        a.category == b.category
        and np.allclose(a.center, b.center, atol=tol)
        and np.allclose(a.dimensions, b.dimensions, atol=tol)
        and np.allclose(
            geom.rotation_matrix(*a.rotations),
            geom.rotation_matrix(*b.rotations),
            atol=tol,
        )
    )


class TestCentroidExport:
    def test_absolute_re_adds_offset(self):
        aset = sample_set()
        offset = (10.0, 20.0, 30.0)
        payload = json.loads(export_labels(aset, "centroid_abs", center_offset=offset))
        first = payload["objects"][0]
        assert first["centroid"]["x"] == pytest.approx(11.0)
        assert first["centroid"]["y"] == pytest.approx(22.0)
        assert first["centroid"]["z"] == pytest.approx(30.5)
        assert first["rotations"] == {"x": 0.0, "y": 0.0, "z": 30.0}
        assert payload["center_offset"] == [10.0, 20.0, 30.0]

    def test_relative_keeps_centered_frame(self):
        aset = sample_set()
        payload = json.loads(
            export_labels(aset, "centroid_rel", center_offset=(10, 20, 30))
        )
        assert payload["objects"][0]["centroid"]["x"] == pytest.approx(1.0)

    def test_degrees_only_in_files(self):
        payload = json.loads(export_labels(sample_set(), "centroid_rel"))
        yaws = [obj["rotations"]["z"] for obj in payload["objects"]]
        assert yaws[0] == pytest.approx(30.0)  # not 0.5236 rad
        for obj in payload["objects"]:
            for v in obj["rotations"].values():
                assert -180.0 < v <= 180.0

    def test_deterministic_bytes(self):
        aset = sample_set()
        assert export_labels(aset, "centroid_abs") == export_labels(aset, "centroid_abs")

    @pytest.mark.parametrize("fmt", ["centroid_abs", "centroid_rel"])
    def test_round_trip(self, fmt):
        aset = sample_set()
        offset = (5.0, -3.0, 1.0)
        data = export_labels(aset, fmt, center_offset=offset)
        again = import_labels(data, fmt, center_offset=offset)
        assert again.cloud_name == aset.cloud_name
        assert again.cloud_path == aset.cloud_path
        for a, b in zip(aset.objects, again.objects):
            assert boxes_close(a, b)


class TestVerticesFormat:
    def test_round_trip_exact_exports(self):
        aset = sample_set()
        data = export_labels(aset, "vertices")
        again = import_labels(data, "vertices")
        for a, b in zip(aset.objects, again.objects):
            assert boxes_close(a, b)
            assert np.abs(bbox_corners(a) - bbox_corners(b)).max() < 1e-6

    def test_fit_residual_small_for_exact_corners(self):
        box = BBox("c", (0.3, -0.7, 1.1), (1.2, 0.8, 0.6), (0.3, 0.5, -1.2))
        fitted = box_from_corners("c", bbox_corners(box))
        assert np.abs(bbox_corners(fitted) - bbox_corners(box)).max() < 1e-9

    def test_perturbed_corners_rejected(self):
        rng = np.random.default_rng(3)
        box = BBox("c", (0, 0, 0), (1.5, 1.0, 0.75), (0.2, 0.1, 0.9))
        noisy = bbox_corners(box) + rng.normal(0, 1e-2, (8, 3))
        with pytest.raises(AmbiguousVertices):
            box_from_corners("c", noisy)

    def test_malformed_vertex_count(self):
        data = json.dumps({"objects": [{"name": "x", "vertices": [[0, 0, 0]] * 7}]})
        with pytest.raises(MalformedLabelFile):
            import_labels(data.encode(), "vertices")


class TestKittiFormat:
    def test_frame_map_example(self):
        aset = AnnotationSet(
            "s",
            "s.xyz",
            (BBox("car", (1.0, 2.0, 0.5), (2.0, 1.0, 0.5), (0, 0, math.radians(30))),),
        )
        line = export_labels(aset, "kitti").decode().strip()
        parts = line.split()
        assert parts[0] == "car"
        assert parts[1:8] == ["0"] * 7
        h, w, l = (float(v) for v in parts[8:11])
        assert (h, w, l) == pytest.approx((0.5, 1.0, 2.0))
        x_c, y_c, z_c = (float(v) for v in parts[11:14])
        assert (x_c, y_c, z_c) == pytest.approx((-2.0, -0.5, 1.0))
        assert float(parts[14]) == pytest.approx(-math.radians(30))
        assert len(parts) == 15

    def test_round_trip_yaw_only(self):
        aset = sample_set(yaw_only=True)
        again = import_labels(export_labels(aset, "kitti"), "kitti")
        for a, b in zip(aset.objects, again.objects):
            assert boxes_close(a, b)

    def test_rolled_box_rejected(self):
        aset = AnnotationSet(
            "s",
            "s.xyz",
            (BBox("car", (0, 0, 0), (1, 1, 1), (math.radians(10), 0, 0)),),
        )
        with pytest.raises(UnrepresentableRotation):
            export_labels(aset, "kitti")

    def test_bad_field_count(self):
        with pytest.raises(MalformedLabelFile):
            import_labels(b"car 0 0 0 1 2 3\n", "kitti")


class TestSchemas:
    @pytest.mark.parametrize(
        "fmt,schema_file",
        [
            ("centroid_abs", "centroid_abs.schema.json"),
            ("centroid_rel", "centroid_rel.schema.json"),
            ("vertices", "vertices.schema.json"),
        ],
    )
    def test_exports_validate(self, fmt, schema_file):
        schema = json.loads((SCHEMA_DIR / schema_file).read_text())
        payload = json.loads(export_labels(sample_set(), fmt, center_offset=(1, 2, 3)))
        jsonschema.validate(payload, schema)

    def test_schema_rejects_radian_leak(self):
        schema = json.loads((SCHEMA_DIR / "centroid_abs.schema.json").read_text())
        payload = json.loads(export_labels(sample_set(), "centroid_abs"))
        payload["objects"][0]["rotations"]["z"] = 400.0  # degrees out of range
        with pytest.raises(jsonschema.ValidationError):
            jsonschema.validate(payload, schema)


class TestFilesAndProgress:
    def test_write_read_round_trip(self, tmp_path):
        aset = sample_set()
        path = tmp_path / "labels" / "scene.json"
        write_labels(aset, path, "centroid_rel")
        again = read_labels(path, "centroid_rel")
        for a, b in zip(aset.objects, again.objects):
            assert boxes_close(a, b)

    def test_scan_counts_non_empty_only(self, tmp_path):
        clouds = tmp_path / "clouds"
        labels = tmp_path / "labels"
        clouds.mkdir()
        labels.mkdir()
        for i in range(4):
            (clouds / f"scan{i}.xyz").write_text("0 0 0\n")
        write_labels(sample_set(), labels / "scan0.json", "centroid_rel")
        (labels / "scan1.json").write_bytes(b"")  # empty: not labeled
        report = scan_progress(clouds, labels)
        assert report.total_clouds == 4
        assert report.labeled_clouds == 1
        assert report.fraction == pytest.approx(0.25)

    def test_empty_folder(self, tmp_path):
        clouds = tmp_path / "clouds"
        labels = tmp_path / "labels"
        clouds.mkdir()
        labels.mkdir()
        report = scan_progress(clouds, labels)
        assert report.total_clouds == 0
        assert report.fraction == 0.0

    def test_missing_folder_raises(self, tmp_path):
        with pytest.raises(IoFailure):
            scan_progress(tmp_path / "nope", tmp_path / "labels")

    def test_category_warnings(self):
        warnings = category_warnings(sample_set(), ["chair", "table"])
        assert len(warnings) == 1
        assert "lamp" in warnings[0]

    def test_all_formats_round_trip_through_files(self, tmp_path):
        for fmt in LABEL_FORMATS:
            aset = sample_set(yaw_only=(fmt == "kitti"))
            path = tmp_path / f"scene{'.txt' if fmt == 'kitti' else '.json'}"
            write_labels(aset, path, fmt, center_offset=(1, 2, 3))
            again = read_labels(path, fmt, center_offset=(1, 2, 3))
            assert len(again.objects) == len(aset.objects)
            for a, b in zip(aset.objects, again.objects):
                assert boxes_close(a, b)
