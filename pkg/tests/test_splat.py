"""Splat rendering against the brute-force reference, plus backend parity."""

import numpy as np
import pytest

import splatcache as sc
from splatcache import _kernels
from splatcache.splat import Z_NEAR
from conftest import brute_force_render, look_at, make_camera


def random_cloud(rng, n=400, spread=1.5, z_range=(1.0, 6.0)):
    positions = np.column_stack(
        [
            rng.uniform(-spread, spread, n),
            rng.uniform(-spread, spread, n),
            rng.uniform(*z_range, n),
        ]
    )
    colors = rng.random((n, 3)).astype(np.float32)
    return sc.PointCloud(positions, colors, np.zeros((n, 2)))


class TestAgainstBruteForce:
    @pytest.mark.parametrize("radius", [0.0, 1.0, 1.5, 2.0, 3.3])
    def test_random_clouds_match_reference(self, radius):
        rng = np.random.default_rng(int(radius * 10) + 1)
        cloud = random_cloud(rng, n=350)
        cam = make_camera(width=48, height=36, fx=40.0, fy=40.0)
        fast = sc.render(cloud, cam, radius)
        slow = brute_force_render(cloud, cam, radius)
        assert np.array_equal(fast.mask, slow.mask)
        assert np.array_equal(fast.image, slow.image)
        assert np.array_equal(fast.depth, slow.depth)

    def test_rotated_camera_matches_reference(self):
        rng = np.random.default_rng(42)
        cloud = random_cloud(rng, n=300, z_range=(2.0, 5.0))
        cam = make_camera(width=40, height=30, fx=35.0, pose=look_at([1.0, 0.5, 0.2], [0, 0, 3.5]))
        for radius in (0.0, 1.5):
            fast = sc.render(cloud, cam, radius)
            slow = brute_force_render(cloud, cam, radius)
            assert np.array_equal(fast.image, slow.image)
            assert np.array_equal(fast.mask, slow.mask)
            assert np.array_equal(fast.depth, slow.depth)


class TestWinnerRule:
    def test_exact_tie_goes_to_lowest_index(self):
        # Two points on the same ray at the same depth: index 0 wins, in both
        # input orders the *lower index of that order* wins.
        cam = make_camera(width=9, height=9)
        pos = np.array([[0.0, 0.0, 2.0], [0.0, 0.0, 2.0]])
        colors = np.array([[1, 0, 0], [0, 1, 0]], dtype=np.float32)
        frame = sc.render(sc.PointCloud(pos, colors, np.zeros((2, 2))), cam)
        assert np.array_equal(frame.image[4, 4], [1, 0, 0])
        frame2 = sc.render(sc.PointCloud(pos, colors[::-1], np.zeros((2, 2))), cam)
        assert np.array_equal(frame2.image[4, 4], [0, 1, 0])

    def test_near_tie_within_epsilon_goes_to_lowest_index(self):
        cam = make_camera(width=9, height=9)
        # Second point is nearer by less than Z_EPSILON: still index 0.
        pos = np.array([[0.0, 0.0, 2.0], [0.0, 0.0, 2.0 - 2e-10]])
        colors = np.array([[1, 0, 0], [0, 1, 0]], dtype=np.float32)
        frame = sc.render(sc.PointCloud(pos, colors, np.zeros((2, 2))), cam)
        assert np.array_equal(frame.image[4, 4], [1, 0, 0])

    def test_clear_depth_win(self):
        cam = make_camera(width=9, height=9)
        pos = np.array([[0.0, 0.0, 3.0], [0.0, 0.0, 2.0]])
        colors = np.array([[1, 0, 0], [0, 1, 0]], dtype=np.float32)
        frame = sc.render(sc.PointCloud(pos, colors, np.zeros((2, 2))), cam)
        assert np.array_equal(frame.image[4, 4], [0, 1, 0])
        assert frame.depth[4, 4] == 2.0

    def test_near_plane_culling(self):
        cam = make_camera(width=9, height=9)
        pos = np.array([[0.0, 0.0, Z_NEAR / 2], [0.0, 0.0, -1.0]])
        colors = np.ones((2, 3), dtype=np.float32)
        frame = sc.render(sc.PointCloud(pos, colors, np.zeros((2, 2))), cam)
        assert not frame.mask.any()

    def test_far_offscreen_points_never_alias_in(self):
        # Projections at astronomical pixel values must not wrap into view.
        cam = make_camera(width=9, height=9)
        pos = np.array([[1e9, 1e9, 1e-5]])
        colors = np.ones((1, 3), dtype=np.float32)
        frame = sc.render(sc.PointCloud(pos, colors, np.zeros((1, 2))), cam, 1.0)
        assert not frame.mask.any()

    def test_determinism(self):
        rng = np.random.default_rng(7)
        cloud = random_cloud(rng)
        cam = make_camera()
        a = sc.render(cloud, cam, 1.5)
        b = sc.render(cloud, cam, 1.5)
        assert np.array_equal(a.image, b.image)
        assert np.array_equal(a.depth, b.depth)

    def test_negative_radius_rejected(self):
        cam = make_camera()
        with pytest.raises(sc.InvalidInput):
            sc.render(sc.PointCloud.empty(), cam, -0.5)


class TestBackends:
    def test_both_backends_available(self):
        backends = _kernels.available_backends()
        assert "numpy" in backends
        assert _kernels.BACKEND in backends

    def test_backends_bit_identical(self):
        backends = _kernels.available_backends()
        if len(backends) < 2:
            pytest.skip("compiled backend not built")
        rng = np.random.default_rng(3)
        h, w = 37, 53
        for radius in (0.0, 1.0, 2.7):
            n = 900
            ix = rng.integers(-5, w + 5, n).astype(np.int64)
            iy = rng.integers(-5, h + 5, n).astype(np.int64)
            depth = rng.uniform(0.5, 9.0, n)
            # Inject exact duplicates to exercise tie-breaking.
            depth[rng.integers(0, n, 50)] = 2.5
            results = {
                name: fn(ix, iy, depth, h, w, radius, sc.Z_EPSILON)
                for name, fn in backends.items()
            }
            ref = results.pop("numpy")
            for name, got in results.items():
                assert np.array_equal(ref, got), f"{name} differs at radius {radius}"


class TestSplatRadius:
    def test_radius_zero_is_single_pixel(self):
        cam = make_camera(width=9, height=9)
        cloud = sc.PointCloud(
            np.array([[0.0, 0.0, 2.0]]), np.ones((1, 3), dtype=np.float32), np.zeros((1, 2))
        )
        frame = sc.render(cloud, cam, 0)
        assert frame.mask.sum() == 1
        assert frame.mask[4, 4]

    def test_radius_one_is_plus_shape(self):
        cam = make_camera(width=9, height=9)
        cloud = sc.PointCloud(
            np.array([[0.0, 0.0, 2.0]]), np.ones((1, 3), dtype=np.float32), np.zeros((1, 2))
        )
        frame = sc.render(cloud, cam, 1.0)
        assert frame.mask.sum() == 5
        for dy, dx in ((0, 0), (0, 1), (0, -1), (1, 0), (-1, 0)):
            assert frame.mask[4 + dy, 4 + dx]

    def test_coverage_monotone_in_radius(self):
        rng = np.random.default_rng(5)
        cloud = random_cloud(rng, n=60)
        cam = make_camera()
        prev = np.zeros((cam.height, cam.width), dtype=bool)
        for radius in (0.0, 1.0, 2.0, 3.0):
            mask = sc.render(cloud, cam, radius).mask
            assert np.array_equal(mask | prev, mask), "coverage must grow with radius"
            prev = mask


class TestRenderOutputs:
    def test_identity_reprojection_bit_exact(self, basic_scene, basic_camera):
        frame = sc.posed_frame(basic_scene, basic_camera)
        cloud = sc.unproject_frame(frame)
        rendered = sc.render(cloud, basic_camera, 0)
        assert np.array_equal(rendered.mask, frame.depth.valid)
        assert np.array_equal(rendered.image[rendered.mask], frame.image[frame.depth.valid])
        assert (rendered.image[~rendered.mask] == 0).all()

    def test_render_depth_matches_render(self):
        rng = np.random.default_rng(11)
        cloud = random_cloud(rng)
        cam = make_camera()
        frame = sc.render(cloud, cam, 1.5)
        depth = sc.render_depth(cloud, cam, 1.5)
        assert np.array_equal(depth.valid, frame.mask)
        assert np.array_equal(depth.values, frame.depth)

    def test_empty_cloud_renders_empty(self):
        frame = sc.render(sc.PointCloud.empty(), make_camera(), 2.0)
        assert not frame.mask.any()
        assert (frame.image == 0).all()
        assert frame.coverage == 0.0

    def test_rendered_frame_validation(self):
        with pytest.raises(sc.InvalidInput):
            sc.RenderedFrame(
                image=np.zeros((4, 4, 3)), mask=np.zeros((4, 5), dtype=bool), depth=np.zeros((4, 4))
            )
        with pytest.raises(sc.InvalidInput):
            sc.RenderedFrame(image=np.zeros((4, 4)), mask=np.zeros((4, 4), dtype=bool), depth=np.zeros((4, 4)))

    def test_guidance_shapes_and_length_check(self):
        cam = make_camera()
        scene = sc.make_scene(sc.SceneSpec(seed=3))
        cache = sc.build_multiview([sc.posed_frame(scene, cam)], 3)
        traj = sc.Trajectory([cam, cam, cam])
        videos = sc.render_guidance(cache, traj)
        assert len(videos) == 1
        assert videos[0].view_index == 0
        assert len(videos[0].frames) == 3
        with pytest.raises(sc.InvalidInput):
            sc.render_guidance(cache, sc.Trajectory([cam]))
