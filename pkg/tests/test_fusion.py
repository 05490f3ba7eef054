"""Toy latent encoder, mask pooling, in-layer, fusion strategies, generators."""

import itertools

import numpy as np
import pytest

import splatcache as sc
from splatcache import fusion


def frame_of(image, mask=None, depth=None):
    image = np.asarray(image, dtype=np.float32)
    h, w = image.shape[:2]
    if mask is None:
        mask = np.ones((h, w), dtype=bool)
    if depth is None:
        depth = np.where(mask, 2.0, 0.0)
    return sc.RenderedFrame(image=image, mask=mask, depth=depth)


def random_video(rng, length=2, h=16, w=24):
    return rng.random((length, h, w, 3))


class TestEncoder:
    def test_patch1_c3_is_identity(self):
        rng = np.random.default_rng(0)
        video = random_video(rng)
        latent = sc.encode(video, patch=1, channels=3)
        assert latent.shape == (2, 3, 16, 24)
        assert np.array_equal(latent.values, np.moveaxis(video, 3, 1))

    def test_constant_half_video(self):
        video = np.full((3, 16, 16, 3), 0.5)
        latent = sc.encode(video, patch=8, channels=4)
        assert latent.shape == (3, 4, 2, 2)
        assert np.array_equal(latent.values, np.full((3, 4, 2, 2), 0.5))

    def test_patch_means_match_loop_oracle(self):
        rng = np.random.default_rng(1)
        video = random_video(rng, length=2, h=16, w=24)
        p = 8
        latent = sc.encode(video, patch=p, channels=4)
        for t in range(2):
            for cy in range(16 // p):
                for cx in range(24 // p):
                    block = video[t, cy * p : (cy + 1) * p, cx * p : (cx + 1) * p]
                    for c in range(3):
                        assert latent.values[t, c, cy, cx] == pytest.approx(
                            block[..., c].mean(), abs=1e-12
                        )
                    lum = block.mean(axis=(0, 1)).mean()
                    assert latent.values[t, 3, cy, cx] == pytest.approx(lum, abs=1e-12)

    def test_accepts_rendered_frames(self):
        rng = np.random.default_rng(2)
        img = rng.random((16, 16, 3)).astype(np.float32)
        latent = sc.encode([frame_of(img)], patch=8, channels=3)
        assert latent.shape == (1, 3, 2, 2)

    def test_validation(self):
        video = np.zeros((1, 16, 16, 3))
        with pytest.raises(sc.InvalidInput):
            sc.encode(video, patch=5)  # 16 not divisible by 5
        with pytest.raises(sc.InvalidInput):
            sc.encode(video, patch=8, channels=5)
        with pytest.raises(sc.InvalidInput):
            sc.encode(np.zeros((1, 16, 16, 4)), patch=8)


class TestMaskPooling:
    def test_single_false_pixel_kills_exactly_one_cell(self):
        mask = np.ones((16, 24), dtype=bool)
        mask[9, 17] = False
        cells = sc.downsample_mask(mask, patch=8)
        assert cells.shape == (2, 3)
        assert cells.sum() == 5.0
        assert cells[1, 2] == 0.0

    def test_all_covered(self):
        cells = sc.downsample_mask(np.ones((8, 8), dtype=bool), patch=8)
        assert np.array_equal(cells, [[1.0]])

    def test_video_latent_mask_shape(self):
        frames = [
            frame_of(np.zeros((16, 16, 3)), mask=np.ones((16, 16), dtype=bool)),
            frame_of(np.zeros((16, 16, 3)), mask=np.zeros((16, 16), dtype=bool)),
        ]
        lm = sc.video_latent_mask(frames, patch=8)
        assert lm.values.shape == (2, 1, 2, 2)
        assert lm.values[0].sum() == 4.0
        assert lm.values[1].sum() == 0.0

    def test_masked_latent_zeroes_cells(self):
        rng = np.random.default_rng(3)
        latent = sc.encode(random_video(rng, 1, 16, 16), patch=8, channels=4)
        mask = sc.LatentMask(values=np.array([[[[1.0, 0.0], [0.0, 1.0]]]]), patch=8)
        masked = sc.masked_latent(latent, mask)
        assert np.array_equal(masked.values[0, :, 0, 1], np.zeros(4))
        assert np.array_equal(masked.values[0, :, 0, 0], latent.values[0, :, 0, 0])

    def test_masked_latent_mismatch(self):
        latent = sc.LatentVideo(values=np.zeros((1, 4, 2, 2)), patch=8)
        mask = sc.LatentMask(values=np.ones((1, 1, 3, 2)), patch=8)
        with pytest.raises(sc.InvalidInput):
            sc.masked_latent(latent, mask)


class TestInLayer:
    def test_identity_weights_are_concat_passthrough(self):
        rng = np.random.default_rng(4)
        masked = sc.LatentVideo(values=rng.normal(size=(2, 4, 3, 3)), patch=8)
        noisy = sc.LatentVideo(values=rng.normal(size=(2, 4, 3, 3)), patch=8)
        out = sc.in_layer(masked, noisy, sc.InLayerWeights.identity(4))
        assert out.values.shape == (2, 8, 3, 3)
        assert np.array_equal(out.values[:, :4], masked.values)
        assert np.array_equal(out.values[:, 4:], noisy.values)

    def test_matches_per_cell_matmul_oracle(self):
        rng = np.random.default_rng(5)
        weights = sc.InLayerWeights.from_seed(channels=4, features=6, seed=11)
        masked = sc.LatentVideo(values=rng.normal(size=(2, 4, 2, 3)), patch=8)
        noisy = sc.LatentVideo(values=rng.normal(size=(2, 4, 2, 3)), patch=8)
        out = sc.in_layer(masked, noisy, weights)
        for t in range(2):
            for y in range(2):
                for x in range(3):
                    cell = np.concatenate(
                        [masked.values[t, :, y, x], noisy.values[t, :, y, x]]
                    )
                    expected = weights.weight @ cell + weights.bias
                    assert np.allclose(out.values[t, :, y, x], expected, atol=1e-12)

    def test_seeded_weights_deterministic(self):
        a = sc.InLayerWeights.from_seed(4, 8, seed=3)
        b = sc.InLayerWeights.from_seed(4, 8, seed=3)
        c = sc.InLayerWeights.from_seed(4, 8, seed=4)
        assert np.array_equal(a.weight, b.weight)
        assert not np.array_equal(a.weight, c.weight)
        assert a.weight.shape == (8, 8)
        assert np.array_equal(a.bias, np.zeros(8))

    def test_channel_mismatch(self):
        weights = sc.InLayerWeights.from_seed(3, 6, seed=0)
        latent = sc.LatentVideo(values=np.zeros((1, 4, 2, 2)), patch=8)
        with pytest.raises(sc.InvalidInput):
            sc.in_layer(latent, latent, weights)

    def test_weights_container_roundtrip(self, tmp_path):
        weights = sc.InLayerWeights.from_seed(4, 7, seed=13)
        path = tmp_path / "w.bin"
        weights.save(path)
        loaded = sc.InLayerWeights.load(path)
        assert np.array_equal(
            loaded.weight, weights.weight.astype(np.float32).astype(np.float64)
        )
        assert np.array_equal(loaded.bias, weights.bias)
        assert loaded.features == 7
        assert loaded.channels == 4


class TestNoisyLatent:
    def test_seeded_draw_reproduces(self):
        z0 = sc.LatentVideo(values=np.zeros((1, 4, 2, 2)), patch=8)
        sched = sc.NoiseSchedulePoint(tau=0.5, alpha=0.0, sigma=2.0, seed=21)
        noisy = sc.make_noisy_latent(z0, sched)
        expected = 2.0 * np.random.default_rng(21).standard_normal((1, 4, 2, 2))
        assert np.array_equal(noisy.values, expected)

    def test_sigma_zero_returns_scaled_signal(self):
        rng = np.random.default_rng(6)
        z0 = sc.LatentVideo(values=rng.normal(size=(1, 4, 2, 2)), patch=8)
        noisy = sc.make_noisy_latent(z0, sc.NoiseSchedulePoint(tau=0.0, alpha=1.0, sigma=0.0))
        assert np.array_equal(noisy.values, z0.values)

    def test_schedule_validation(self):
        with pytest.raises(sc.InvalidInput):
            sc.NoiseSchedulePoint(tau=1.5, alpha=1.0, sigma=0.0)
        with pytest.raises(sc.InvalidInput):
            sc.NoiseSchedulePoint(tau=0.5, alpha=0.0, sigma=0.0)


class TestFusionStrategies:
    def features_from(self, rng, views, shape=(2, 6, 3, 4)):
        return [sc.FusedFeatures(values=rng.normal(size=shape)) for _ in range(views)]

    def test_max_pool_permutation_invariant_all_orders(self):
        rng = np.random.default_rng(7)
        feats = self.features_from(rng, 4)
        base = sc.fuse_max(feats).values
        for perm in itertools.permutations(range(4)):
            permuted = sc.fuse_max([feats[i] for i in perm]).values
            assert np.array_equal(base, permuted)

    def test_max_pool_single_view_identity(self):
        rng = np.random.default_rng(8)
        (f,) = self.features_from(rng, 1)
        assert np.array_equal(sc.fuse_max([f]).values, f.values)

    def test_max_pool_dominating_view(self):
        low = sc.FusedFeatures(values=np.zeros((1, 2, 2, 2)))
        high = sc.FusedFeatures(values=np.ones((1, 2, 2, 2)))
        assert np.array_equal(sc.fuse_max([low, high]).values, high.values)

    def test_max_pool_shape_mismatch(self):
        a = sc.FusedFeatures(values=np.zeros((1, 2, 2, 2)))
        b = sc.FusedFeatures(values=np.zeros((1, 2, 2, 3)))
        with pytest.raises(sc.InvalidInput):
            sc.fuse_max([a, b])

    def test_concat_layout_and_padding(self):
        rng = np.random.default_rng(9)
        z1 = sc.LatentVideo(values=rng.normal(size=(2, 4, 2, 2)), patch=8)
        z2 = sc.LatentVideo(values=rng.normal(size=(2, 4, 2, 2)), patch=8)
        out = sc.fuse_concat([z1, z2], max_views=4)
        assert out.values.shape == (2, 16, 2, 2)
        assert np.array_equal(out.values[:, 0:4], z1.values)
        assert np.array_equal(out.values[:, 4:8], z2.values)
        assert (out.values[:, 8:] == 0).all()

    def test_concat_view_order_is_significant(self):
        rng = np.random.default_rng(10)
        z1 = sc.LatentVideo(values=rng.normal(size=(1, 4, 2, 2)), patch=8)
        z2 = sc.LatentVideo(values=rng.normal(size=(1, 4, 2, 2)), patch=8)
        assert not np.array_equal(
            sc.fuse_concat([z1, z2]).values, sc.fuse_concat([z2, z1]).values
        )

    def test_concat_rejects_too_many_views(self):
        z = sc.LatentVideo(values=np.zeros((1, 4, 2, 2)), patch=8)
        with pytest.raises(sc.InvalidInput):
            sc.fuse_concat([z] * 5, max_views=4)

    def test_explicit_merge_preserves_order(self):
        rng = np.random.default_rng(11)
        a = sc.PointCloud(rng.normal(size=(3, 3)), rng.random((3, 3)), np.zeros((3, 2)))
        b = sc.PointCloud(rng.normal(size=(2, 3)), rng.random((2, 3)), np.zeros((2, 2)))
        merged = sc.fuse_explicit([a, b])
        assert len(merged) == 5
        assert np.array_equal(merged.positions[:3], a.positions)
        assert np.array_equal(merged.positions[3:], b.positions)
        assert np.array_equal(merged.colors[:3], a.colors)


class TestGenerators:
    def guidance_of(self, *frames_lists):
        return [
            sc.GuidanceVideo(frames=tuple(frames), view_index=i)
            for i, frames in enumerate(frames_lists)
        ]

    def test_stub_single_full_view_is_identity(self):
        rng = np.random.default_rng(12)
        img = rng.random((8, 8, 3)).astype(np.float32)
        guidance = self.guidance_of([frame_of(img)])
        out = sc.generate(guidance)
        assert len(out) == 1
        assert np.array_equal(out[0].image, img)
        assert out[0].mask.all()

    def test_stub_picks_nearest_view_per_pixel(self):
        h = w = 4
        img_near = np.full((h, w, 3), 0.25, dtype=np.float32)
        img_far = np.full((h, w, 3), 0.75, dtype=np.float32)
        near = sc.RenderedFrame(image=img_near, mask=np.ones((h, w), bool), depth=np.full((h, w), 1.0))
        far = sc.RenderedFrame(image=img_far, mask=np.ones((h, w), bool), depth=np.full((h, w), 3.0))
        out = sc.generate(self.guidance_of([far], [near]))
        assert np.allclose(out[0].image, 0.25)

    def test_stub_tie_prefers_lower_view_index(self):
        h = w = 4
        a = frame_of(np.full((h, w, 3), 0.2, dtype=np.float32))
        b = frame_of(np.full((h, w, 3), 0.9, dtype=np.float32))
        out = sc.generate(self.guidance_of([a], [b]))
        assert np.allclose(out[0].image, 0.2)

    def test_stub_fills_uncovered_with_mean_covered_color(self):
        img = np.zeros((4, 4, 3), dtype=np.float32)
        img[:2] = 0.5
        mask = np.zeros((4, 4), dtype=bool)
        mask[:2] = True
        out = sc.generate(self.guidance_of([frame_of(img, mask=mask)]))
        assert np.allclose(out[0].image[:2], 0.5)
        assert np.allclose(out[0].image[2:], 0.5)  # mean of covered = 0.5
        assert not out[0].mask[2:].any()

    def test_stub_all_uncovered_is_mid_gray(self):
        mask = np.zeros((4, 4), dtype=bool)
        out = sc.generate(self.guidance_of([frame_of(np.zeros((4, 4, 3)), mask=mask)]))
        assert np.allclose(out[0].image, 0.5)
        assert not out[0].mask.any()

    def test_reconcile_exact_on_cell_constant_view(self):
        rng = np.random.default_rng(13)
        cells = rng.random((2, 3, 3)).astype(np.float32)
        img = cells.repeat(8, axis=0).repeat(8, axis=1)
        guidance = self.guidance_of([frame_of(img)])
        out = sc.generate(guidance, sc.LatentReconcileGenerator(patch=8))
        assert np.array_equal(out[0].image, img)
        assert out[0].mask.all()

    def test_reconcile_partial_cells_are_uncovered(self):
        mask = np.ones((16, 16), dtype=bool)
        mask[0, 0] = False  # breaks the top-left 8x8 cell
        out = sc.generate(
            self.guidance_of([frame_of(np.full((16, 16, 3), 0.3, dtype=np.float32), mask=mask)]),
            sc.LatentReconcileGenerator(patch=8),
        )
        assert not out[0].mask[:8, :8].any()
        assert out[0].mask[8:, 8:].all()

    def test_generator_videos_must_agree(self):
        a = frame_of(np.zeros((4, 4, 3)))
        b = frame_of(np.zeros((4, 8, 3)))
        with pytest.raises(sc.InvalidInput):
            sc.generate(self.guidance_of([a], [b]))
        with pytest.raises(sc.InvalidInput):
            sc.generate(self.guidance_of([a], [b, b]))
        with pytest.raises(sc.InvalidInput):
            sc.generate([])


class TestConservation:
    def test_identity_configuration_returns_guidance_on_covered_cells(self):
        """Patch 1, channels 3, zero noise, identity in-layer, max over one
        view: the first three fused channels reproduce the masked guidance
        exactly, pixel for pixel."""
        rng = np.random.default_rng(14)
        img = rng.random((8, 8, 3)).astype(np.float32)
        mask = rng.random((8, 8)) > 0.3
        frame = frame_of(img, mask=mask)
        latent = sc.encode([frame], patch=1, channels=3)
        lmask = sc.video_latent_mask([frame], patch=1)
        masked = sc.masked_latent(latent, lmask)
        noisy = sc.make_noisy_latent(
            sc.LatentVideo(values=np.zeros_like(masked.values), patch=1),
            sc.NoiseSchedulePoint(tau=1.0, alpha=1.0, sigma=0.0),
        )
        fused = sc.fuse_max([sc.in_layer(masked, noisy, sc.InLayerWeights.identity(3))])
        recon = np.moveaxis(fused.values[:, :3], 1, 3)[0]
        assert np.array_equal(
            recon[mask].astype(np.float32), img[mask]
        )
        assert (recon[~mask] == 0).all()
