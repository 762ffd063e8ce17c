"""Image quality metrics on [0, 1] images."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidInputError
from .validation import check_image

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    offsets = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    taps = np.exp(-(offsets ** 2) / (2.0 * sigma * sigma))
    window = np.outer(taps, taps)
    return window / window.sum()


_WINDOW = _gaussian_window()


def _local_mean(channel: np.ndarray) -> np.ndarray:
    patches = sliding_window_view(channel, (SSIM_WINDOW, SSIM_WINDOW))
    return np.einsum("hwij,ij->hw", patches, _WINDOW)


def _channel_ssim(a: np.ndarray, b: np.ndarray, c1: float, c2: float) -> float:
    mu_a = _local_mean(a)
    mu_b = _local_mean(b)
    var_a = _local_mean(a * a) - mu_a * mu_a
    var_b = _local_mean(b * b) - mu_b * mu_b
    cov = _local_mean(a * b) - mu_a * mu_b
    numer = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    denom = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(numer / denom))


def ssim(a, b, data_range: float = 1.0) -> float:
    """Mean local structural similarity with an 11x11 Gaussian window.

    Local statistics are Gaussian-weighted (sigma 1.5) and evaluated on the
    fully valid interior; channels are averaged. The result lies in [-1, 1],
    equal to 1 only for identical inputs.
    """
    img_a = check_image(a, "first image")
    img_b = check_image(b, "second image")
    if img_a.shape != img_b.shape:
        raise InvalidInputError(f"image shapes disagree: {img_a.shape} vs {img_b.shape}")
    if img_a.shape[0] < SSIM_WINDOW or img_a.shape[1] < SSIM_WINDOW:
        raise InvalidInputError(
            f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {img_a.shape}"
        )
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    if img_a.ndim == 2:
        return _channel_ssim(img_a, img_b, c1, c2)
    values = [
        _channel_ssim(img_a[:, :, c], img_b[:, :, c], c1, c2)
        for c in range(img_a.shape[2])
    ]
    return float(np.mean(values))


def psnr(a, b, data_range: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; infinite for identical images."""
    img_a = check_image(a, "first image")
    img_b = check_image(b, "second image")
    if img_a.shape != img_b.shape:
        raise InvalidInputError(f"image shapes disagree: {img_a.shape} vs {img_b.shape}")
    mse = float(np.mean((img_a - img_b) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(data_range * data_range / mse)
