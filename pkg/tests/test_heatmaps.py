import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vcmcodec.errors import InvalidInputError
from vcmcodec.heatmaps import (
    difference_heatmaps,
    expected_point,
    extract_keypoints,
    gaussian_heatmap,
    point_covariance,
    regularize_covariance,
    softmax_normalize,
)

from conftest import random_heatmap


# ---------------------------------------------------------------------------
# independent oracles (naive double loops, no numpy reductions)
# ---------------------------------------------------------------------------

def oracle_softmax(raw):
    values = [math.exp(v) for row in raw for v in row]
    total = sum(values)
    return np.array(values).reshape(np.asarray(raw).shape) / total


def oracle_point(heatmap):
    x = y = 0.0
    for row in range(heatmap.shape[0]):
        for col in range(heatmap.shape[1]):
            x += heatmap[row, col] * col
            y += heatmap[row, col] * row
    return np.array([x, y])


def oracle_covariance(heatmap, point):
    out = np.zeros((2, 2))
    for row in range(heatmap.shape[0]):
        for col in range(heatmap.shape[1]):
            d = np.array([col - point[0], row - point[1]])
            out += heatmap[row, col] * np.outer(d, d)
    return out


class TestSoftmax:
    def test_uniform_on_zeros(self):
        out = softmax_normalize(np.zeros((2, 2)))
        np.testing.assert_allclose(out, np.full((2, 2), 0.25), atol=1e-15)

    def test_saturates_on_large_score(self):
        raw = np.zeros((4, 4))
        raw[1, 2] = 1000.0
        out = softmax_normalize(raw)
        assert out[1, 2] == pytest.approx(1.0, abs=1e-12)
        assert out.sum() == pytest.approx(1.0, abs=1e-6)

    def test_matches_direct_summation(self, rng):
        raw = rng.normal(0.0, 3.0, size=(8, 8))
        expected = oracle_softmax(raw)
        np.testing.assert_allclose(softmax_normalize(raw), expected, rtol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(shift=st.floats(-50.0, 50.0, allow_nan=False))
    def test_invariant_to_constant_shift(self, shift):
        raw = np.arange(12.0).reshape(3, 4)
        base = softmax_normalize(raw)
        shifted = softmax_normalize(raw + shift)
        np.testing.assert_allclose(shifted, base, rtol=1e-12)

    def test_rejects_nonfinite(self):
        raw = np.zeros((2, 2))
        raw[0, 0] = np.nan
        with pytest.raises(InvalidInputError):
            softmax_normalize(raw)


class TestExpectedPoint:
    def test_point_mass(self):
        h = np.zeros((8, 8))
        h[5, 3] = 1.0
        np.testing.assert_array_equal(expected_point(h), [3.0, 5.0])

    def test_uniform_centroid(self):
        h = np.full((4, 4), 1 / 16)
        np.testing.assert_allclose(expected_point(h), [1.5, 1.5], atol=1e-12)

    def test_matches_double_loop(self, rng):
        h = random_heatmap(rng, 16, 16)
        np.testing.assert_allclose(expected_point(h), oracle_point(h), rtol=1e-9)

    def test_stays_inside_lattice_hull(self, rng):
        for _ in range(20):
            h = random_heatmap(rng, rng.integers(1, 12), rng.integers(1, 12))
            x, y = expected_point(h)
            assert 0.0 <= x <= h.shape[1] - 1
            assert 0.0 <= y <= h.shape[0] - 1

    def test_rejects_unnormalized(self):
        with pytest.raises(InvalidInputError):
            expected_point(np.full((3, 3), 0.5))


class TestPointCovariance:
    def test_point_mass_has_no_spread(self):
        h = np.zeros((6, 6))
        h[2, 4] = 1.0
        np.testing.assert_array_equal(point_covariance(h), np.zeros((2, 2)))

    def test_uniform_row_variance(self):
        # discrete uniform over {0..N-1}: variance (N^2 - 1) / 12
        h = np.full((1, 5), 0.2)
        cov = point_covariance(h)
        assert cov[0, 0] == pytest.approx(2.0, abs=1e-12)
        assert cov[0, 1] == 0.0 and cov[1, 0] == 0.0 and cov[1, 1] == 0.0

    def test_matches_double_loop(self, rng):
        h = random_heatmap(rng, 16, 16)
        p = expected_point(h)
        np.testing.assert_allclose(point_covariance(h, p), oracle_covariance(h, p), rtol=1e-9)

    def test_exactly_symmetric_and_psd(self, rng):
        for _ in range(25):
            h = random_heatmap(rng, 9, 13)
            cov = point_covariance(h)
            assert cov[0, 1] == cov[1, 0]  # bit-equal off-diagonals
            assert np.linalg.eigvalsh(cov).min() >= -1e-9


class TestGaussianHeatmap:
    def test_unit_peak_on_lattice(self):
        out = gaussian_heatmap(np.array([4.0, 3.0]), np.eye(2), (8, 8))
        assert out[3, 4] == 1.0

    def test_hand_evaluated_spot_value(self):
        out = gaussian_heatmap(np.array([8.0, 8.0]), 4.0 * np.eye(2), (17, 17), alpha=0.5)
        assert out[8, 10] == pytest.approx(math.exp(-0.5), abs=1e-6)
        assert out[10, 8] == pytest.approx(math.exp(-0.5), abs=1e-6)

    def test_anisotropic_decay(self):
        p = np.array([8.0, 8.0])
        out = gaussian_heatmap(p, np.diag([1.0, 100.0]), (17, 17))
        assert out[9, 8] > out[8, 9]  # y offset decays far less than x offset
        # log-decay along y is 100x slower than along x at equal offsets
        assert -np.log(out[8, 9]) == pytest.approx(-100.0 * np.log(out[9, 8]), rel=1e-9)

    def test_maximum_at_nearest_lattice_cell(self):
        out = gaussian_heatmap(np.array([5.3, 7.8]), 2.0 * np.eye(2), (16, 16))
        peak = np.unravel_index(np.argmax(out), out.shape)
        assert peak == (8, 5)

    def test_values_in_unit_interval(self):
        out = gaussian_heatmap(np.array([8.0, 8.0]), 4.0 * np.eye(2), (17, 17))
        assert out.min() > 0.0 and out.max() <= 1.0

    def test_singular_covariance_is_regularized(self):
        out = gaussian_heatmap(np.array([2.0, 2.0]), np.zeros((2, 2)), (5, 5))
        assert out[2, 2] == 1.0
        assert np.all(np.isfinite(out))

    def test_rejects_non_psd(self):
        with pytest.raises(InvalidInputError):
            gaussian_heatmap(np.array([2.0, 2.0]), -np.eye(2), (5, 5))

    def test_rejects_bad_alpha(self):
        with pytest.raises(InvalidInputError):
            gaussian_heatmap(np.array([2.0, 2.0]), np.eye(2), (5, 5), alpha=0.0)


class TestRegularize:
    def test_leaves_healthy_covariance_alone(self):
        cov = np.array([[4.0, 1.0], [1.0, 3.0]])
        np.testing.assert_array_equal(regularize_covariance(cov), cov)

    def test_lifts_degenerate_covariance(self):
        out = regularize_covariance(np.zeros((2, 2)))
        np.testing.assert_allclose(out, 1e-4 * np.eye(2))


class TestDifferenceHeatmaps:
    def test_identical_sets_cancel(self):
        stack = np.stack([gaussian_heatmap(np.array([3.0, 3.0]), np.eye(2), (8, 8))] * 2)
        np.testing.assert_array_equal(difference_heatmaps(stack, stack), np.zeros_like(stack))

    def test_zero_key_is_identity(self):
        target = np.stack([gaussian_heatmap(np.array([3.0, 3.0]), np.eye(2), (8, 8))])
        np.testing.assert_array_equal(
            difference_heatmaps(target, np.zeros_like(target)), target
        )

    def test_offset_dipole_mass_balance(self):
        key = gaussian_heatmap(np.array([6.0, 8.0]), 2.0 * np.eye(2), (16, 16))
        target = gaussian_heatmap(np.array([8.0, 8.0]), 2.0 * np.eye(2), (16, 16))
        diff = difference_heatmaps(target[None], key[None])[0]
        assert diff.min() < 0 < diff.max()
        # direct summation: total difference mass equals difference of masses
        assert diff.sum() == pytest.approx(target.sum() - key.sum(), abs=1e-9)
        assert np.abs(diff).max() <= 1.0

    def test_rejects_mismatched_stacks(self):
        a = np.zeros((2, 4, 4))
        with pytest.raises(InvalidInputError):
            difference_heatmaps(a, np.zeros((3, 4, 4)))
        with pytest.raises(InvalidInputError):
            difference_heatmaps(a, np.zeros((2, 5, 4)))


def test_extract_keypoints_roundtrips_rendered_gaussians():
    positions = np.array([[5.0, 9.0], [11.0, 4.0]])
    stack = []
    for p in positions:
        g = gaussian_heatmap(p, 3.0 * np.eye(2), (16, 16))
        stack.append(g / g.sum())
    found, covs = extract_keypoints(np.stack(stack))
    np.testing.assert_allclose(found, positions, atol=0.05)
    assert covs.shape == (2, 2, 2)
