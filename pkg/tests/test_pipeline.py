import numpy as np
import pytest

from prost.errors import ConfigError, DimensionError
from prost.pipeline import (
    FrameBuffer,
    PreprocStats,
    SegmentationMask,
    foreground_weights_from_mask,
    median3x3,
    resample,
    segment,
    upsample_mask,
)


def mask_of(grid):
    arr = np.asarray(grid, dtype=np.uint8)
    return SegmentationMask(arr.shape[1], arr.shape[0], arr.reshape(-1))


class TestPreprocStats:
    def test_single_frame_mean(self):
        stats = PreprocStats.empty(4)
        frame = np.array([0.1, 0.2, 0.3, 0.4])
        stats.update(frame)
        np.testing.assert_allclose(stats.mean, frame, atol=1e-15)

    def test_identical_frames_leave_mean_unchanged(self):
        stats = PreprocStats.empty(3)
        frame = np.array([0.5, 0.25, 0.75])
        stats.update(frame)
        stats.update(frame)
        np.testing.assert_allclose(stats.mean, frame, atol=1e-15)

    def test_matches_batch_statistics(self):
        rng = np.random.default_rng(0)
        frames = rng.uniform(0.0, 1.0, size=(100, 50))
        stats = PreprocStats.empty(50)
        for frame in frames:
            stats.update(frame)
        stats.freeze()
        np.testing.assert_allclose(stats.mean, frames.mean(axis=0), atol=1e-10)
        assert stats.std == pytest.approx(np.std(frames, ddof=1), abs=1e-8)

    def test_apply_requires_freeze(self):
        stats = PreprocStats.empty(3)
        stats.update(np.zeros(3))
        with pytest.raises(ConfigError):
            stats.apply(np.zeros(3))

    def test_update_after_freeze_rejected(self):
        stats = PreprocStats.empty(3)
        stats.update(np.ones(3))
        stats.freeze()
        with pytest.raises(ConfigError):
            stats.update(np.ones(3))

    def test_frozen_transform_is_fixed_affine(self):
        rng = np.random.default_rng(1)
        stats = PreprocStats.empty(10)
        for _ in range(5):
            stats.update(rng.uniform(size=10))
        stats.freeze()
        x = rng.uniform(size=10)
        np.testing.assert_array_equal(stats.apply(x), stats.apply(x))
        # frame equal to the mean maps to zero
        assert np.linalg.norm(stats.apply(stats.mean.copy())) == 0.0

    def test_linearity_and_round_trip(self):
        rng = np.random.default_rng(2)
        stats = PreprocStats.empty(8)
        for _ in range(4):
            stats.update(rng.uniform(size=8))
        stats.freeze()
        a, b = rng.uniform(size=8), rng.uniform(size=8)
        np.testing.assert_allclose(
            stats.apply(a) - stats.apply(b), (a - b) / stats.std, atol=1e-12
        )
        np.testing.assert_allclose(stats.invert(stats.apply(a)), a, atol=1e-10)

    def test_constant_frames_floor_std(self):
        stats = PreprocStats.empty(5)
        stats.update(np.full(5, 0.3))
        stats.update(np.full(5, 0.3))
        stats.freeze()
        assert stats.std == 1e-6


class TestResample:
    def test_constant_image_stays_constant(self):
        frame = FrameBuffer(5, 4, 1, np.full(20, 0.37))
        out = resample(frame, 9, 7)
        np.testing.assert_array_equal(out.data, np.full(63, 0.37))

    def test_identity_dims_bit_identical(self):
        rng = np.random.default_rng(3)
        frame = FrameBuffer(6, 5, 3, rng.uniform(size=90))
        out = resample(frame, 6, 5)
        np.testing.assert_array_equal(out.data, frame.data)

    def test_aligned_downsample_averages_blocks(self):
        values = np.arange(16, dtype=float).reshape(4, 4)
        frame = FrameBuffer(4, 4, 1, values.reshape(-1))
        out = resample(frame, 2, 2)
        expected = np.array([[2.5, 4.5], [10.5, 12.5]])
        np.testing.assert_allclose(out.data.reshape(2, 2), expected, atol=1e-12)

    def test_checkerboard_downsample(self):
        board = np.indices((4, 4)).sum(axis=0) % 2
        frame = FrameBuffer(4, 4, 1, board.astype(float).reshape(-1))
        out = resample(frame, 2, 2)
        np.testing.assert_allclose(out.data, np.full(4, 0.5), atol=1e-12)

    def test_linearity(self):
        rng = np.random.default_rng(4)
        a = rng.uniform(size=48)
        b = rng.uniform(size=48)
        fa = FrameBuffer(8, 6, 1, a)
        fb = FrameBuffer(8, 6, 1, b)
        combo = FrameBuffer(8, 6, 1, 0.3 * a + 0.7 * b)
        lhs = resample(combo, 5, 4).data
        rhs = 0.3 * resample(fa, 5, 4).data + 0.7 * resample(fb, 5, 4).data
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    def test_rejects_zero_dims(self):
        frame = FrameBuffer(4, 4, 1, np.zeros(16))
        with pytest.raises(DimensionError):
            resample(frame, 0, 3)


class TestSegment:
    def test_zero_residual_all_background(self):
        mask = segment(np.zeros(12), (4, 3, 1), 0.35)
        assert not mask.labels.any()

    def test_single_channel_spike(self):
        residual = np.zeros(2 * 3 * 3)
        # pixel 4 (row 1, col 1 of 2x3), green channel
        residual[6 + 4] = 0.7
        mask = segment(residual, (2, 3, 3), 0.35)
        assert mask.labels.sum() == 1 and mask.labels[4] == 1

    def test_boundary_counts_as_foreground(self):
        mask = segment(np.array([0.35]), (1, 1, 1), 0.35)
        assert mask.labels[0] == 1

    def test_matches_naive_loop(self):
        rng = np.random.default_rng(5)
        w, h, c = 6, 5, 3
        residual = rng.normal(0.0, 0.4, size=w * h * c)
        mask = segment(residual, (w, h, c), 0.35)
        planes = residual.reshape(c, h * w)
        for pixel in range(h * w):
            expected = int(max(abs(planes[ch][pixel]) for ch in range(c)) >= 0.35)
            assert mask.labels[pixel] == expected


class TestMedian:
    def test_all_foreground_unchanged(self):
        mask = mask_of(np.ones((5, 7)))
        np.testing.assert_array_equal(median3x3(mask).labels, mask.labels)

    def test_isolated_pixel_removed(self):
        grid = np.zeros((5, 5), dtype=int)
        grid[2, 2] = 1
        assert not median3x3(mask_of(grid)).labels.any()

    def test_single_hole_filled(self):
        grid = np.ones((5, 5), dtype=int)
        grid[2, 2] = 0
        assert median3x3(mask_of(grid)).labels.all()

    def test_matches_sorted_window_oracle(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            grid = rng.integers(0, 2, size=(16, 16))
            out = median3x3(mask_of(grid)).grid()
            padded = np.pad(grid, 1, mode="edge")
            for y in range(16):
                for x in range(16):
                    window = sorted(padded[y : y + 3, x : x + 3].reshape(-1))
                    assert out[y, x] == window[4]

    def test_idempotent_on_block_patterns(self):
        grid = np.zeros((10, 10), dtype=int)
        grid[2:6, 3:8] = 1
        once = median3x3(mask_of(grid))
        twice = median3x3(once)
        np.testing.assert_array_equal(once.labels, twice.labels)


class TestWeightsFromMask:
    def test_all_background_gives_unit_weights(self):
        weights = foreground_weights_from_mask(mask_of(np.zeros((3, 4))), 3, 5e-5)
        assert weights.shape == (36,)
        assert np.all(weights == 1.0)

    def test_foreground_pixel_downweights_all_channels(self):
        grid = np.zeros((2, 2), dtype=int)
        grid[0, 1] = 1
        weights = foreground_weights_from_mask(mask_of(grid), 3, 5e-5)
        assert np.sum(weights == 5e-5) == 3
        assert weights[1] == 5e-5 and weights[5] == 5e-5 and weights[9] == 5e-5

    def test_consistent_with_segment(self):
        rng = np.random.default_rng(7)
        w, h, c = 5, 4, 3
        residual = rng.normal(0.0, 0.4, size=w * h * c)
        mask = segment(residual, (w, h, c), 0.35)
        weights = foreground_weights_from_mask(mask, c, 0.25)
        planes = np.abs(residual.reshape(c, h * w))
        flagged = planes.max(axis=0) >= 0.35
        np.testing.assert_array_equal(weights.reshape(c, h * w)[0] == 0.25, flagged)

    def test_rejects_bad_omega(self):
        with pytest.raises(ConfigError):
            foreground_weights_from_mask(mask_of(np.zeros((2, 2))), 1, 0.0)


class TestUpsampleMask:
    def test_identity(self):
        mask = mask_of(np.eye(4, dtype=int))
        assert upsample_mask(mask, 4, 4) is mask

    def test_single_pixel_to_constant(self):
        mask = mask_of([[1]])
        out = upsample_mask(mask, 5, 3)
        assert out.labels.all() and out.labels.size == 15

    def test_two_by_two_replicates_blocks(self):
        mask = mask_of([[1, 0], [0, 1]])
        out = upsample_mask(mask, 4, 4).grid()
        expected = np.array(
            [[1, 1, 0, 0], [1, 1, 0, 0], [0, 0, 1, 1], [0, 0, 1, 1]], dtype=np.uint8
        )
        np.testing.assert_array_equal(out, expected)


class TestFrameBuffer:
    def test_shape_validation(self):
        with pytest.raises(DimensionError):
            FrameBuffer(4, 3, 1, np.zeros(11))
        with pytest.raises(DimensionError):
            FrameBuffer(4, 3, 2, np.zeros(24))

    def test_to_gray_averages_channels(self):
        rng = np.random.default_rng(8)
        data = rng.uniform(size=3 * 6)
        frame = FrameBuffer(3, 2, 3, data)
        gray = frame.to_gray()
        np.testing.assert_allclose(gray.data, data.reshape(3, 6).mean(axis=0), atol=1e-15)
        assert gray.channels == 1
