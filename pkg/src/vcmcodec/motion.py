"""Flow-guided frame synthesis.

A non-key frame is reconstructed from the decoded key frame and two keypoint
sets: regenerate Gaussian heatmaps for both frames, estimate a dense flow
map (analytically from the keypoints, or with a learned estimator fed the
key frame plus difference heatmaps), backward-warp the key frame, and
optionally refine with a learned decoder. All functions are pure.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import InvalidInputError, InvalidWeightsError
from .heatmaps import DEFAULT_ALPHA, difference_heatmaps, gaussian_heatmap
from .nnet import WeightBundle, unet_forward
from .validation import as_finite_array, check_flow, check_image

# Below this total interpolation-kernel mass a pixel is treated as static
# background and gets zero flow.
WEIGHT_FLOOR = 1e-8

BASE_SIGMA_INTERP = 8.0
BASE_SIGMA_DIM = 64.0


@dataclasses.dataclass(frozen=True)
class SynthesisConfig:
    """How to turn keypoints plus a key frame into a target frame.

    ``variant`` is "analytic" (deterministic sparse-to-dense interpolation,
    no weights needed) or "learned" (requires a WeightBundle with ``flow.*``
    tensors; ``refine.*`` tensors enable the optional refinement decoder).
    """

    variant: str = "analytic"
    sigma_interp: float | None = None
    alpha: float = DEFAULT_ALPHA
    weights: WeightBundle | None = None

    def __post_init__(self):
        if self.variant not in ("analytic", "learned"):
            raise InvalidInputError(f"unknown synthesis variant {self.variant!r}")
        if self.variant == "learned":
            if self.weights is None:
                raise InvalidInputError("learned synthesis requires a weight bundle")
            if not self.weights.has_prefix("flow"):
                raise InvalidWeightsError("weight bundle has no 'flow.*' tensors")
        if self.sigma_interp is not None and not self.sigma_interp > 0:
            raise InvalidInputError(f"sigma_interp must be positive, got {self.sigma_interp!r}")
        if not self.alpha > 0:
            raise InvalidInputError(f"alpha must be positive, got {self.alpha!r}")


def default_sigma_interp(shape) -> float:
    """Interpolation bandwidth scaled proportionally to image size."""
    return BASE_SIGMA_INTERP * min(int(shape[0]), int(shape[1])) / BASE_SIGMA_DIM


def warp_bilinear(image, flow) -> np.ndarray:
    """Backward warp: ``out[p] = bilinear_sample(image, p + flow[p])``.

    Sample positions are clamped to the image border, and the output is
    clamped to [0, 1]. A zero flow reproduces the input exactly.
    """
    img = check_image(image)
    squeeze = img.ndim == 2
    img3 = img[:, :, None] if squeeze else img
    height, width = img3.shape[:2]
    fl = check_flow(flow, height, width)

    sx = np.arange(width, dtype=np.float64)[None, :] + fl[..., 0]
    sy = np.arange(height, dtype=np.float64)[:, None] + fl[..., 1]
    sx = np.clip(sx, 0.0, width - 1.0)
    sy = np.clip(sy, 0.0, height - 1.0)
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    x1 = np.minimum(x0 + 1, width - 1)
    y1 = np.minimum(y0 + 1, height - 1)
    fx = (sx - x0)[..., None]
    fy = (sy - y0)[..., None]

    top = img3[y0, x0] * (1.0 - fx) + img3[y0, x1] * fx
    bottom = img3[y1, x0] * (1.0 - fx) + img3[y1, x1] * fx
    out = top * (1.0 - fy) + bottom * fy
    np.clip(out, 0.0, 1.0, out=out)
    return out[:, :, 0] if squeeze else out


def analytic_flow(
    key_positions,
    target_positions,
    shape,
    sigma_interp: float | None = None,
) -> np.ndarray:
    """Dense backward flow interpolated from sparse keypoint displacements.

    Each pixel takes the normalized Gaussian-weighted mean of the per-point
    displacements ``key - target``, with weights centered on the target
    keypoints. Pixels whose total weight falls below WEIGHT_FLOOR keep zero
    flow (static background).
    """
    key = as_finite_array(key_positions, "key positions")
    target = as_finite_array(target_positions, "target positions")
    if key.shape != target.shape or key.ndim != 2 or key.shape[-1] != 2:
        raise InvalidInputError(
            f"keypoint sets disagree: {key.shape} vs {target.shape}"
        )
    height, width = int(shape[0]), int(shape[1])
    flow = np.zeros((height, width, 2))
    if key.shape[0] == 0:
        return flow
    sigma = default_sigma_interp(shape) if sigma_interp is None else float(sigma_interp)
    if not sigma > 0:
        raise InvalidInputError(f"sigma_interp must be positive, got {sigma!r}")

    displacement = key - target  # (L, 2)
    xs = np.arange(width, dtype=np.float64)
    ys = np.arange(height, dtype=np.float64)
    d2 = (
        (xs[None, None, :] - target[:, 0, None, None]) ** 2
        + (ys[None, :, None] - target[:, 1, None, None]) ** 2
    )
    weights = np.exp(-d2 / (2.0 * sigma * sigma))  # (L, H, W)
    total = weights.sum(axis=0)
    numer = np.einsum("lhw,lc->hwc", weights, displacement)
    covered = total >= WEIGHT_FLOOR
    flow[covered] = numer[covered] / total[covered, None]
    return flow


def regenerate_heatmap_stack(positions, covariances, shape, alpha: float) -> np.ndarray:
    """Gaussian heatmap per keypoint, stacked as (L, H, W)."""
    pos = as_finite_array(positions, "positions")
    stack = np.empty((pos.shape[0], int(shape[0]), int(shape[1])))
    for l in range(pos.shape[0]):
        stack[l] = gaussian_heatmap(pos[l], covariances[l], shape, alpha)
    return stack


def synthesize_frame(
    key_frame,
    key_positions,
    key_covariances,
    target_positions,
    target_covariances,
    config: SynthesisConfig = SynthesisConfig(),
) -> np.ndarray:
    """Reconstruct a target frame from the key frame and two keypoint sets.

    With the analytic backend and identical keypoints this is the exact
    identity on the key frame.
    """
    img = check_image(key_frame, "key frame")
    shape = img.shape[:2]
    key_pos = as_finite_array(key_positions, "key positions")
    tgt_pos = as_finite_array(target_positions, "target positions")
    if key_pos.shape != tgt_pos.shape:
        raise InvalidInputError(
            f"keypoint sets disagree: {key_pos.shape} vs {tgt_pos.shape}"
        )

    if config.variant == "analytic":
        flow = analytic_flow(key_pos, tgt_pos, shape, config.sigma_interp)
        return warp_bilinear(img, flow)

    heat_key = regenerate_heatmap_stack(key_pos, key_covariances, shape, config.alpha)
    heat_tgt = regenerate_heatmap_stack(tgt_pos, target_covariances, shape, config.alpha)
    side = difference_heatmaps(heat_tgt, heat_key).transpose(1, 2, 0)  # (H, W, L)

    img3 = img[:, :, None] if img.ndim == 2 else img
    flow_net = config.weights.subset("flow")
    flow = unet_forward(flow_net, np.concatenate([img3, side], axis=2))
    if flow.shape[2] != 2:
        raise InvalidWeightsError(
            f"flow estimator must output 2 channels, got {flow.shape[2]}"
        )
    warped = warp_bilinear(img, flow)
    if not config.weights.has_prefix("refine"):
        return warped
    warped3 = warped[:, :, None] if warped.ndim == 2 else warped
    refined = unet_forward(
        config.weights.subset("refine"), np.concatenate([warped3, side], axis=2)
    )
    if refined.shape[2] != img3.shape[2]:
        raise InvalidWeightsError(
            f"refinement decoder must output {img3.shape[2]} channels, got {refined.shape[2]}"
        )
    out = np.clip(refined, 0.0, 1.0)
    return out[:, :, 0] if img.ndim == 2 else out
