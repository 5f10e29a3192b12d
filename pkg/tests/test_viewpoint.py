import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cloudlabel.errors import BackgroundDepth
from cloudlabel.viewpoint import (
    Camera,
    DepthBuffer,
    Orbit,
    Pan,
    Rasterizer,
    Zoom,
    camera_from_dict,
    camera_to_dict,
    navigate,
    project,
    rasterize_depth,
    unproject,
    view_projection,
)

ELEVATION_LIMIT = math.pi / 2 - 1e-3


def random_camera(rng):
    return Camera(
        orbit_target=tuple(rng.uniform(-5, 5, 3)),
        distance=rng.uniform(1.0, 20.0),
        azimuth=rng.uniform(-math.pi, math.pi),
        elevation=rng.uniform(-1.2, 1.2),
        fov_y=rng.uniform(0.4, 1.6),
        near=0.01,
        far=300.0,
        viewport=(int(rng.integers(64, 1280)), int(rng.integers(64, 1024))),
    )


class TestViewProjection:
    def test_target_projects_to_center(self):
        cam = Camera(orbit_target=(1.0, 2.0, 3.0), distance=4.0, azimuth=0.7, elevation=0.3)
        px, py, depth = project(cam, cam.orbit_target)
        assert px == pytest.approx(cam.width / 2, abs=1e-6)
        assert py == pytest.approx(cam.height / 2, abs=1e-6)
        assert 0.0 < depth < 1.0

    def test_near_plane_depth_zero(self):
        cam = Camera(distance=5.0)
        vp = view_projection(cam)
        eye = cam.eye()
        _, _, forward = cam.basis()
        at_near = eye + cam.near * forward
        clip = vp @ np.append(at_near, 1.0)
        depth = (clip[2] / clip[3] + 1.0) / 2.0
        assert depth == pytest.approx(0.0, abs=1e-6)

    def test_far_plane_depth_one(self):
        cam = Camera(distance=5.0)
        eye = cam.eye()
        _, _, forward = cam.basis()
        clip = view_projection(cam) @ np.append(eye + cam.far * forward, 1.0)
        assert (clip[2] / clip[3] + 1.0) / 2.0 == pytest.approx(1.0, abs=1e-9)

    def test_matrix_invertible(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            vp = view_projection(random_camera(rng))
            assert np.all(np.isfinite(np.linalg.inv(vp)))


class TestProjectUnproject:
    def test_behind_camera(self):
        cam = Camera(distance=5.0, azimuth=0.0, elevation=0.0)
        # eye is at +x from target looking toward -x; behind = beyond the eye
        behind = cam.eye() + np.array([1.0, 0.0, 0.0])
        assert project(cam, behind) is None

    def test_at_near_plane_is_behind(self):
        cam = Camera(distance=5.0)
        eye = cam.eye()
        _, _, forward = cam.basis()
        assert project(cam, eye + cam.near * forward * 0.999) is None

    def test_background_depth_rejected(self):
        cam = Camera()
        with pytest.raises(BackgroundDepth):
            unproject(cam, 320, 240, 1.0)

    def test_round_trip_thousand_points(self):
        rng = np.random.default_rng(7)
        cam = random_camera(rng)
        count = 0
        while count < 1000:
            p = np.asarray(cam.orbit_target) + rng.uniform(-8, 8, 3)
            hit = project(cam, p)
            if hit is None:
                continue
            px, py, depth = hit
            if not (0 <= px < cam.width and 0 <= py < cam.height and depth < 1.0):
                continue
            count += 1
            assert np.allclose(unproject(cam, px, py, depth), p, atol=1e-4)

    def test_corner_pixel_inside_frustum(self):
        cam = Camera(distance=5.0)
        corner = unproject(cam, 0.0, 0.0, 0.5)
        px, py, depth = project(cam, corner)
        assert px == pytest.approx(0.0, abs=1e-6)
        assert py == pytest.approx(0.0, abs=1e-6)
        assert depth == pytest.approx(0.5, abs=1e-9)


class TestNavigate:
    def test_zero_orbit_is_identity(self):
        cam = Camera(azimuth=0.4, elevation=0.2)
        assert navigate(cam, Orbit(0, 0)) == cam

    def test_zoom_inverse(self):
        cam = Camera(distance=5.0)
        back = navigate(navigate(cam, Zoom(+1)), Zoom(-1))
        assert back.distance == pytest.approx(5.0, abs=1e-12)

    def test_orbit_past_vertical_clamps(self):
        cam = Camera(elevation=0.0)
        up = navigate(cam, Orbit(0, -10_000))
        assert up.elevation == pytest.approx(ELEVATION_LIMIT)
        down = navigate(cam, Orbit(0, +10_000))
        assert down.elevation == pytest.approx(-ELEVATION_LIMIT)

    def test_pan_moves_target_in_view_plane(self):
        cam = Camera(orbit_target=(0, 0, 0), distance=5.0, azimuth=0.3, elevation=0.2)
        panned = navigate(cam, Pan(30, -12))
        delta = np.asarray(panned.orbit_target) - np.asarray(cam.orbit_target)
        _, _, forward = cam.basis()
        assert abs(delta @ forward) < 1e-12
        assert np.linalg.norm(delta) > 0

    def test_pan_inverse(self):
        cam = Camera(orbit_target=(1, 2, 3), distance=5.0, azimuth=0.3, elevation=0.2)
        back = navigate(navigate(cam, Pan(17, -4)), Pan(-17, 4))
        assert np.allclose(back.orbit_target, cam.orbit_target, atol=1e-12)

    @given(
        st.lists(
            st.one_of(
                st.builds(Orbit, st.floats(-500, 500), st.floats(-500, 500)),
                st.builds(Pan, st.floats(-500, 500), st.floats(-500, 500)),
                st.builds(Zoom, st.floats(-40, 40)),
            ),
            max_size=30,
        )
    )
    @settings(max_examples=60, deadline=None)
    def test_invariants_hold_for_any_event_sequence(self, events):
        cam = Camera(distance=3.0)
        for event in events:
            cam = navigate(cam, event)
            assert -ELEVATION_LIMIT <= cam.elevation <= ELEVATION_LIMIT
            assert cam.distance >= cam.near
            assert -math.pi < cam.azimuth <= math.pi


class TestRasterizeDepth:
    def test_empty_frustum_all_background(self):
        cam = Camera(orbit_target=(0, 0, 0), distance=5.0, viewport=(32, 24))
        behind = cam.eye() + np.array([10.0, 0.0, 0.0])
        buf = rasterize_depth(np.array([behind]), cam, 3)
        assert np.all(buf.depths == 1.0)

    def test_single_centered_point_splat(self):
        cam = Camera(orbit_target=(0, 0, 0), distance=5.0, viewport=(64, 48))
        buf = rasterize_depth(np.array([[0.0, 0.0, 0.0]]), cam, 3)
        hit = buf.depths < 1.0
        assert int(hit.sum()) == 9
        ys, xs = np.nonzero(hit)
        assert xs.min() == 31 and xs.max() == 33
        assert ys.min() == 23 and ys.max() == 25

    def test_point_size_one(self):
        cam = Camera(orbit_target=(0, 0, 0), distance=5.0, viewport=(64, 48))
        buf = rasterize_depth(np.array([[0.0, 0.0, 0.0]]), cam, 1)
        assert int((buf.depths < 1.0).sum()) == 1

    def test_nearer_point_wins_on_shared_ray(self):
        cam = Camera(orbit_target=(0, 0, 0), distance=5.0, azimuth=0.0, elevation=0.0,
                     viewport=(64, 48))
        # eye on +x axis; x=+1 is nearer to the eye than x=-1
        pts = np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
        buf = rasterize_depth(pts, cam, 1)
        near_hit = project(cam, pts[0])
        depth = buf.depths[int(near_hit[1]), int(near_hit[0])]
        assert depth == pytest.approx(near_hit[2], abs=1e-12)

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        pts = rng.uniform(-1, 1, (500, 3))
        cam = Camera(distance=4.0, viewport=(128, 96))
        a = rasterize_depth(pts, cam, 4)
        b = rasterize_depth(pts, cam, 4)
        assert np.array_equal(a.depths, b.depths)

    def test_upload_once_across_frames(self):
        rng = np.random.default_rng(4)
        raster = Rasterizer(rng.uniform(-1, 1, (200, 3)))
        cam = Camera(distance=4.0, viewport=(64, 64))
        raster.depth_buffer(cam)
        raster.depth_buffer(navigate(cam, Orbit(40, 10)))
        raster.depth_buffer(navigate(cam, Zoom(2)))
        assert raster.uploads == 1

    def test_background_exactly_one(self):
        cam = Camera(distance=5.0, viewport=(32, 32))
        buf = rasterize_depth(np.array([[0.0, 0.0, 0.0]]), cam, 1)
        background = buf.depths[buf.depths >= 1.0]
        assert np.all(background == 1.0)


class TestDepthBufferPgm:
    def test_pgm_header_and_size(self):
        buf = DepthBuffer(np.full((4, 6), 0.5))
        data = buf.to_pgm()
        assert data.startswith(b"P5\n6 4\n65535\n")
        assert len(data) == len(b"P5\n6 4\n65535\n") + 4 * 6 * 2

    def test_pgm_values(self):
        buf = DepthBuffer(np.array([[0.0, 1.0]]))
        body = buf.to_pgm().split(b"65535\n", 1)[1]
        assert body == b"\x00\x00\xff\xff"


class TestCameraDict:
    def test_round_trip(self):
        cam = Camera(orbit_target=(1, 2, 3), distance=7.0, azimuth=0.5,
                     elevation=-0.3, viewport=(800, 600))
        again = camera_from_dict(camera_to_dict(cam))
        assert again == cam

    def test_degrees_at_boundary(self):
        cam = Camera(azimuth=math.pi / 2)
        assert camera_to_dict(cam)["azimuth_deg"] == pytest.approx(90.0)
