"""Heatmap numerics: softmax normalization, soft-argmax keypoint extraction,
covariance estimation, and Gaussian heatmap regeneration.

Coordinate convention used throughout the package: a point is ``(x, y)`` with
``x`` the column and ``y`` the row, origin at the top-left lattice cell, and
lattice coordinates are 0-based integer cell centers. Arrays are indexed
``[row, col]``.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError
from .validation import as_finite_array, check_covariance, check_heatmap, check_point

# Variance floor (pixels^2) added to near-singular covariances before inversion.
COV_EPSILON = 1e-4

DEFAULT_ALPHA = 0.5


def softmax_normalize(raw) -> np.ndarray:
    """Normalize a raw score grid into a heatmap via a max-shifted softmax.

    The shift by the grid maximum makes the exponentials overflow-safe and
    leaves the result unchanged (softmax is invariant to additive constants).
    """
    arr = as_finite_array(raw, "raw grid")
    if arr.ndim != 2 or arr.size == 0:
        raise InvalidInputError(f"raw grid must be 2-D and non-empty, got shape {arr.shape}")
    shifted = arr - arr.max()
    weights = np.exp(shifted)
    return weights / weights.sum()


def expected_point(heatmap) -> np.ndarray:
    """Soft-argmax: the probability-weighted mean lattice position ``(x, y)``.

    The result is a convex combination of lattice points, so it always lies
    inside ``[0, W-1] x [0, H-1]``.
    """
    h = check_heatmap(heatmap)
    ys = np.arange(h.shape[0], dtype=np.float64)
    xs = np.arange(h.shape[1], dtype=np.float64)
    x = float(h.sum(axis=0) @ xs)
    y = float(h.sum(axis=1) @ ys)
    return np.array([x, y])


def point_covariance(heatmap, point=None) -> np.ndarray:
    """Probability-weighted second central moment around ``point``.

    ``point`` defaults to ``expected_point(heatmap)``. The two off-diagonal
    entries are the same stored float, so the result is exactly symmetric.
    """
    h = check_heatmap(heatmap)
    p = expected_point(h) if point is None else check_point(point)
    dx = np.arange(h.shape[1], dtype=np.float64) - p[0]
    dy = np.arange(h.shape[0], dtype=np.float64) - p[1]
    xx = float(h.sum(axis=0) @ (dx * dx))
    yy = float(h.sum(axis=1) @ (dy * dy))
    xy = float(dy @ h @ dx)
    return np.array([[xx, xy], [xy, yy]])


def regularize_covariance(cov, eps: float = COV_EPSILON) -> np.ndarray:
    """Add ``eps * I`` when the smaller eigenvalue falls below ``eps``.

    Keeps degenerate covariances (e.g. from a point-mass heatmap) invertible
    while leaving well-conditioned ones untouched.
    """
    arr = check_covariance(cov)
    mean = (arr[0, 0] + arr[1, 1]) / 2.0
    radius = np.hypot((arr[0, 0] - arr[1, 1]) / 2.0, arr[0, 1])
    if mean - radius < eps:
        arr = arr + eps * np.eye(2)
    return arr


def gaussian_heatmap(point, covariance, shape, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """Render the Gaussian-like field ``exp(-alpha * d^T C^{-1} d)`` on a grid.

    ``d`` is the offset of each lattice cell from ``point``; the covariance is
    regularized before inversion. The peak value is 1 when ``point`` falls on
    a lattice cell.
    """
    p = check_point(point)
    if not alpha > 0:
        raise InvalidInputError(f"alpha must be positive, got {alpha!r}")
    height, width = int(shape[0]), int(shape[1])
    if height < 1 or width < 1:
        raise InvalidInputError(f"grid shape must be positive, got {shape!r}")
    cov = regularize_covariance(covariance)
    det = cov[0, 0] * cov[1, 1] - cov[0, 1] * cov[1, 0]
    if det <= 0:
        raise InvalidInputError("covariance is not positive definite after regularization")
    ixx = cov[1, 1] / det
    iyy = cov[0, 0] / det
    ixy = -cov[0, 1] / det
    dx = np.arange(width, dtype=np.float64) - p[0]
    dy = np.arange(height, dtype=np.float64) - p[1]
    quad = (
        ixx * (dx * dx)[None, :]
        + iyy * (dy * dy)[:, None]
        + 2.0 * ixy * np.outer(dy, dx)
    )
    np.maximum(quad, 0.0, out=quad)  # guard tiny negatives from rounding
    return np.exp(-alpha * quad)


def difference_heatmaps(target_stack, key_stack) -> np.ndarray:
    """Elementwise target-minus-key over two stacks of generated heatmaps."""
    target = as_finite_array(target_stack, "target heatmaps")
    key = as_finite_array(key_stack, "key heatmaps")
    if target.ndim != 3 or key.ndim != 3:
        raise InvalidInputError("heatmap stacks must have shape (L, H, W)")
    if target.shape != key.shape:
        raise InvalidInputError(
            f"heatmap stacks disagree: {target.shape} vs {key.shape}"
        )
    return target - key


def extract_keypoints(heatmap_stack) -> tuple[np.ndarray, np.ndarray]:
    """Extract per-channel positions and covariances from normalized heatmaps.

    Returns ``(positions, covariances)`` with shapes ``(L, 2)`` and
    ``(L, 2, 2)``.
    """
    stack = as_finite_array(heatmap_stack, "heatmap stack")
    if stack.ndim != 3:
        raise InvalidInputError(f"heatmap stack must have shape (L, H, W), got {stack.shape}")
    positions = np.empty((stack.shape[0], 2))
    covariances = np.empty((stack.shape[0], 2, 2))
    for l in range(stack.shape[0]):
        positions[l] = expected_point(stack[l])
        covariances[l] = point_covariance(stack[l], positions[l])
    return positions, covariances
