"""Scale/shift depth alignment against an independent least-squares oracle,
plus the percentile-scaled depth noise model."""

import math

import numpy as np
import pytest

import splatcache as sc
from splatcache.align import nearest_rank_percentile


def oracle_fit(d, dt):
    """Independent normal-equations solve with exactly rounded sums.

    Written separately from the library so a shared bug cannot hide; uses
    the same summation order (fsum over row-major pixels), which the
    closed-form solution makes bit-reproducible.
    """
    d = [float(x) for x in d]
    dt = [float(x) for x in dt]
    n = len(d)
    s_x = math.fsum(d)
    s_y = math.fsum(dt)
    s_xx = math.fsum(x * x for x in d)
    s_xy = math.fsum(x * y for x, y in zip(d, dt))
    det = n * s_xx - s_x * s_x
    scale = (n * s_xy - s_x * s_y) / det
    shift = (s_xx * s_y - s_x * s_xy) / det
    rms = math.sqrt(math.fsum((scale * x + shift - y) ** 2 for x, y in zip(d, dt)) / n)
    return scale, shift, rms


def depth_of(values, valid=None):
    values = np.asarray(values, dtype=np.float64)
    if valid is None:
        valid = np.ones(values.shape, dtype=bool)
    return sc.DepthMap(np.where(valid, values, 0.0), valid)


class TestAlignDepth:
    def test_exact_recovery_of_planted_affine(self):
        rng = np.random.default_rng(0)
        src = rng.uniform(1.0, 4.0, size=(40, 50))
        tgt = 1.7 * src + 0.3
        fit = sc.align_depth(depth_of(src), depth_of(tgt), np.ones_like(src, dtype=bool))
        assert abs(fit.scale - 1.7) / 1.7 <= 1e-9
        assert abs(fit.shift - 0.3) / 0.3 <= 1e-9
        assert fit.residual_rms <= 1e-9
        assert fit.support == 40 * 50

    def test_matches_oracle_bit_for_bit(self):
        rng = np.random.default_rng(1)
        for trial in range(5):
            src = rng.uniform(0.5, 7.0, size=(23, 31))
            tgt = 0.8 * src + 1.1 + rng.normal(0, 0.05, size=src.shape)
            tgt = np.abs(tgt) + 0.1
            mask = rng.random(src.shape) > 0.3
            fit = sc.align_depth(depth_of(src), depth_of(tgt), mask)
            d = src[mask]
            dt = tgt[mask]
            scale, shift, rms = oracle_fit(d, dt)
            assert fit.scale == scale
            assert fit.shift == shift
            assert fit.residual_rms == rms
            assert fit.support == int(mask.sum())

    def test_mask_and_validity_intersect(self):
        # Only pixels that are masked *and* valid in both maps enter the fit:
        # here that is (0,0) and (1,0); the exact affine on those two pixels
        # is recovered even though the excluded pixels disagree wildly.
        src = np.array([[1.0, 2.0], [3.0, 4.0]])
        tgt = np.array([[3.0, 999.0], [7.0, 999.0]])  # 2*d + 1 on the used pixels
        src_valid = np.array([[True, True], [True, False]])
        tgt_valid = np.array([[True, False], [True, True]])
        mask = np.array([[True, True], [True, False]])
        fit = sc.align_depth(depth_of(src, src_valid), depth_of(tgt, tgt_valid), mask)
        assert fit.support == 2
        assert fit.scale == pytest.approx(2.0, abs=1e-12)
        assert fit.shift == pytest.approx(1.0, abs=1e-12)

    def test_underdetermined_raises_with_support(self):
        src = np.array([[1.0, 2.0]])
        tgt = np.array([[2.0, 3.0]])
        mask = np.array([[True, False]])
        with pytest.raises(sc.IllPosedFit) as info:
            sc.align_depth(depth_of(src), depth_of(tgt), mask)
        assert info.value.support == 1

    def test_constant_source_raises(self):
        src = np.full((4, 4), 2.0)
        tgt = np.full((4, 4), 5.0)
        with pytest.raises(sc.IllPosedFit) as info:
            sc.align_depth(depth_of(src), depth_of(tgt), np.ones((4, 4), dtype=bool))
        assert info.value.support == 16

    def test_shape_mismatch(self):
        with pytest.raises(sc.InvalidInput):
            sc.align_depth(depth_of(np.ones((2, 2))), depth_of(np.ones((2, 2))), np.ones((3, 3), bool))

    def test_noisy_recovery_within_tolerance(self):
        # sigma = 0.01 on 10^4 pixels: the estimator's std is ~2e-4 for the
        # scale and ~4e-4 for the shift, far inside the 1% / 2% gates.
        rng = np.random.default_rng(2)
        for trial in range(20):
            src = rng.uniform(1.0, 3.0, size=(100, 100))
            tgt = 1.7 * src + 0.3 + rng.normal(0.0, 0.01, size=src.shape)
            fit = sc.align_depth(depth_of(src), depth_of(tgt), np.ones_like(src, bool))
            assert abs(fit.scale - 1.7) / 1.7 <= 0.01
            assert abs(fit.shift - 0.3) / 0.3 <= 0.02


class TestApplyAlignment:
    def test_affine_applied(self):
        src = depth_of(np.array([[1.0, 2.0]]))
        out = sc.apply_alignment(src, sc.Alignment(scale=2.0, shift=0.5, residual_rms=0.0, support=2))
        assert np.array_equal(out.values, [[2.5, 4.5]])
        assert out.valid.all()

    def test_nonpositive_results_invalidated(self):
        src = depth_of(np.array([[1.0, 5.0]]))
        out = sc.apply_alignment(src, sc.Alignment(scale=1.0, shift=-2.0, residual_rms=0.0, support=2))
        assert not out.valid[0, 0]
        assert out.values[0, 0] == 0.0
        assert out.valid[0, 1]
        assert out.values[0, 1] == 3.0

    def test_invalid_stays_invalid(self):
        src = depth_of(np.array([[1.0, 2.0]]), np.array([[False, True]]))
        out = sc.apply_alignment(src, sc.Alignment(scale=1.0, shift=0.0, residual_rms=0.0, support=2))
        assert not out.valid[0, 0]


class TestPercentile:
    def test_nearest_rank_examples(self):
        vals = np.arange(1.0, 101.0)  # 1..100
        assert nearest_rank_percentile(vals, 0.05) == 5.0
        assert nearest_rank_percentile(vals, 0.95) == 95.0
        assert nearest_rank_percentile(vals, 1.0) == 100.0
        assert nearest_rank_percentile(vals, 0.0) == 1.0

    def test_small_samples(self):
        vals = np.array([3.0, 7.0])
        # ceil(0.05*2) = 1 -> first; ceil(0.95*2) = 2 -> second.
        assert nearest_rank_percentile(vals, 0.05) == 3.0
        assert nearest_rank_percentile(vals, 0.95) == 7.0
        with pytest.raises(sc.InvalidInput):
            nearest_rank_percentile(np.array([]), 0.5)


class TestDepthNoise:
    def test_zero_ratio_bit_identical(self):
        rng = np.random.default_rng(3)
        depth = depth_of(rng.uniform(1, 5, size=(8, 8)))
        out = sc.add_depth_noise(depth, sc.NoiseSpec(ratio=0.0, seed=1))
        assert np.array_equal(out.values, depth.values)
        assert np.array_equal(out.valid, depth.valid)

    def test_constant_depth_bit_identical(self):
        depth = depth_of(np.full((6, 6), 2.5))
        out = sc.add_depth_noise(depth, sc.NoiseSpec(ratio=0.3, seed=1))
        assert np.array_equal(out.values, depth.values)

    def test_noise_reproduces_seeded_draw(self):
        # Freezes the whole recipe: spread = p95 - p05 by nearest rank over
        # the sorted valid depths, sigma = ratio * spread, and one
        # default_rng(seed).normal(0, sigma, n) draw over valid pixels in
        # row-major order.
        vals = np.array([[1.0, 2.0], [3.0, 4.0]])
        depth = depth_of(vals)
        out = sc.add_depth_noise(depth, sc.NoiseSpec(ratio=0.5, seed=9))
        sigma = 0.5 * (4.0 - 1.0)  # p95 -> 4th smallest, p05 -> 1st smallest
        expected = vals.reshape(-1) + np.random.default_rng(9).normal(0.0, sigma, 4)
        valid = expected > 0
        assert np.array_equal(out.valid.reshape(-1), valid)
        assert np.array_equal(out.values.reshape(-1)[valid], expected[valid])

    def test_monte_carlo_sigma(self):
        # 10^6 draws: the sample std must sit within 2% of the recipe sigma.
        rng = np.random.default_rng(4)
        vals = rng.uniform(1.0, 3.0, size=(1000, 1000))
        depth = depth_of(vals)
        ratio = 0.1
        out = sc.add_depth_noise(depth, sc.NoiseSpec(ratio=ratio, seed=5))
        ordered = np.sort(vals.reshape(-1))
        n = ordered.size
        k95 = max(1, math.ceil(0.95 * n))
        k05 = max(1, math.ceil(0.05 * n))
        sigma = ratio * (ordered[k95 - 1] - ordered[k05 - 1])
        noise = out.values[out.valid] - vals[out.valid]
        assert abs(noise.std() - sigma) / sigma <= 0.02
        assert abs(noise.mean()) <= 3.0 * sigma / math.sqrt(n)

    def test_nonpositive_noised_depths_invalidate(self):
        vals = np.array([[0.01, 5.0, 0.01, 5.0, 0.01, 5.0]] * 2)
        depth = depth_of(vals)
        out = sc.add_depth_noise(depth, sc.NoiseSpec(ratio=1.0, seed=0))
        flipped = ~out.valid
        assert flipped.any()
        assert (out.values[flipped] == 0.0).all()

    def test_negative_ratio_rejected(self):
        with pytest.raises(sc.InvalidInput):
            sc.NoiseSpec(ratio=-0.1)
