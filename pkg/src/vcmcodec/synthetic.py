"""Deterministic synthetic clips with exact keypoint ground truth.

Moving anti-aliased disks or rectangles on a black background, rendered as
grayscale frames in [0, 1]. The generator also returns the true keypoint
stream (disk center, or the four rectangle corners) with an isotropic
covariance matched to the shape extent, which makes it a drop-in stand-in
for a learned keypoint predictor in end-to-end tests.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidClipSpecError
from .featstream import DEFAULT_FPS, FeatureStream

SHAPE_KINDS = ("disk", "rect")


def generate_clip(
    kind: str = "disk",
    dims: tuple[int, int] = (64, 64),
    n_frames: int = 32,
    start: tuple[float, float] = (16.0, 16.0),
    velocity: tuple[float, float] = (0.0, 0.0),
    size: float = 8.0,
    fps: float = DEFAULT_FPS,
    n_points: int | None = None,
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> tuple[np.ndarray, FeatureStream]:
    """Render a clip of a shape translating at constant velocity.

    ``start`` is the (x, y) shape center in frame 0 and ``size`` the disk
    radius or rectangle half-extent. ``n_points`` optionally replicates the
    natural keypoints cyclically up to a fixed count (keypoint streams carry
    a fixed L). Same arguments, same seed: bit-identical output.
    """
    if kind not in SHAPE_KINDS:
        raise InvalidClipSpecError(f"unknown shape kind {kind!r}")
    height, width = int(dims[0]), int(dims[1])
    if n_frames < 1:
        raise InvalidClipSpecError(f"n_frames must be >= 1, got {n_frames}")
    if size <= 0:
        raise InvalidClipSpecError(f"size must be positive, got {size!r}")

    centers = np.asarray(start, dtype=np.float64) + (
        np.arange(n_frames, dtype=np.float64)[:, None] * np.asarray(velocity, dtype=np.float64)
    )  # (N, 2) in (x, y)
    margin = size + 1.0  # anti-aliasing band must stay inside the frame
    if (
        centers[:, 0].min() < margin or centers[:, 0].max() > width - 1 - margin
        or centers[:, 1].min() < margin or centers[:, 1].max() > height - 1 - margin
    ):
        raise InvalidClipSpecError(
            f"{kind} of size {size} leaves the {height}x{width} frame along its path"
        )

    rng = np.random.default_rng(seed)
    xs = np.arange(width, dtype=np.float64)
    ys = np.arange(height, dtype=np.float64)
    frames = np.empty((n_frames, height, width))
    for t in range(n_frames):
        cx, cy = centers[t]
        if kind == "disk":
            dist = np.hypot(xs[None, :] - cx, ys[:, None] - cy)
            frame = np.clip(size + 0.5 - dist, 0.0, 1.0)
        else:
            cov_x = np.clip(size + 0.5 - np.abs(xs - cx), 0.0, 1.0)
            cov_y = np.clip(size + 0.5 - np.abs(ys - cy), 0.0, 1.0)
            frame = np.outer(cov_y, cov_x)
        if noise_sigma > 0:
            frame = frame + rng.normal(0.0, noise_sigma, size=frame.shape)
        frames[t] = np.clip(frame, 0.0, 1.0)

    if kind == "disk":
        base_offsets = np.zeros((1, 2))
        variance = size * size / 4.0  # uniform disk: var = r^2 / 4 per axis
    else:
        base_offsets = np.array(
            [[-size, -size], [size, -size], [size, size], [-size, size]]
        )
        variance = size * size / 3.0  # uniform square: var = a^2 / 3 per axis

    natural = centers[:, None, :] + base_offsets[None, :, :]  # (N, L0, 2)
    if n_points is not None:
        if n_points < 1:
            raise InvalidClipSpecError(f"n_points must be >= 1, got {n_points}")
        idx = np.arange(n_points) % natural.shape[1]
        natural = natural[:, idx, :]
    covariances = np.broadcast_to(
        variance * np.eye(2), natural.shape[:2] + (2, 2)
    ).copy()
    stream = FeatureStream(
        positions=natural,
        covariances=covariances,
        height=height,
        width=width,
        fps=fps,
    )
    return frames, stream
