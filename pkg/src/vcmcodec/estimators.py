"""Scikit-learn style estimators wrapping the codec core.

Keypoint descriptors travel through the estimator API packed as 6-scalar
rows (x, y, c_xx, c_xy, c_yx, c_yy) so every stage composes with standard
pipeline tooling: extract -> quantize/inverse-quantize -> render heatmaps,
and fit/predict for frame synthesis.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .errors import InvalidInputError
from .featstream import pack_descriptors, unpack_descriptors
from .heatmaps import extract_keypoints, gaussian_heatmap, softmax_normalize
from .motion import SynthesisConfig, synthesize_frame
from .quantize import (
    COVARIANCE_STEP,
    POSITION_STEP,
    dequantize_covariances,
    dequantize_positions,
    quantize_covariances,
    quantize_positions,
)
from .validation import check_descriptors, check_image


class SoftArgmaxKeypointExtractor(TransformerMixin, BaseEstimator):
    """Turn heatmap stacks into packed keypoint descriptors.

    ``transform`` accepts (L, H, W) or (n, L, H, W); with ``apply_softmax``
    the channels are treated as raw scores and softmax-normalized first.
    Stateless: ``fit`` only validates.
    """

    def __init__(self, apply_softmax: bool = False):
        self.apply_softmax = apply_softmax

    def fit(self, X, y=None):
        return self

    def transform(self, X) -> np.ndarray:
        arr = np.asarray(X, dtype=np.float64)
        if arr.ndim == 3:
            return self._transform_stack(arr)
        if arr.ndim == 4:
            return np.stack([self._transform_stack(stack) for stack in arr])
        raise InvalidInputError(
            f"expected (L, H, W) or (n, L, H, W) heatmaps, got shape {arr.shape}"
        )

    def _transform_stack(self, stack: np.ndarray) -> np.ndarray:
        if self.apply_softmax:
            stack = np.stack([softmax_normalize(channel) for channel in stack])
        positions, covariances = extract_keypoints(stack)
        return pack_descriptors(positions, covariances)


class KeypointQuantizer(TransformerMixin, BaseEstimator):
    """Quantize packed descriptors to integers and invert back.

    ``transform`` maps (..., 6) float descriptors to (..., 6) signed
    integers; ``inverse_transform`` reconstructs float descriptors, with the
    covariance rebuilt from its floored quantized inverse.
    """

    def __init__(self, pos_step: float = POSITION_STEP, cov_step: float = COVARIANCE_STEP):
        self.pos_step = pos_step
        self.cov_step = cov_step

    def fit(self, X, y=None):
        return self

    def transform(self, X) -> np.ndarray:
        positions, covariances = unpack_descriptors(check_descriptors(X))
        qpos = quantize_positions(positions, self.pos_step)
        qicov = quantize_covariances(covariances, self.cov_step)
        return np.concatenate(
            [qpos, qicov.reshape(qicov.shape[:-2] + (4,))], axis=-1
        )

    def inverse_transform(self, X) -> np.ndarray:
        arr = np.asarray(X)
        if arr.ndim < 1 or arr.shape[-1] != 6:
            raise InvalidInputError(
                f"quantized descriptors must end in axis of 6, got shape {arr.shape}"
            )
        positions = dequantize_positions(arr[..., :2], self.pos_step)
        qicov = np.asarray(arr[..., 2:], dtype=np.int64).reshape(arr.shape[:-1] + (2, 2))
        covariances = dequantize_covariances(qicov, self.cov_step)
        return pack_descriptors(positions, covariances)


class GaussianHeatmapRenderer(TransformerMixin, BaseEstimator):
    """Render packed descriptors back into Gaussian heatmap stacks."""

    def __init__(self, height: int = 64, width: int = 64, alpha: float = 0.5):
        self.height = height
        self.width = width
        self.alpha = alpha

    def fit(self, X, y=None):
        return self

    def transform(self, X) -> np.ndarray:
        arr = check_descriptors(X)
        flat = arr.reshape(-1, 6)
        maps = np.empty((flat.shape[0], self.height, self.width))
        for i, row in enumerate(flat):
            positions, covariances = unpack_descriptors(row)
            maps[i] = gaussian_heatmap(
                positions, covariances, (self.height, self.width), self.alpha
            )
        return maps.reshape(arr.shape[:-1] + (self.height, self.width))


class MotionFrameSynthesizer(BaseEstimator):
    """fit on a key frame and its descriptors, predict target frames.

    ``predict`` accepts one descriptor set (L, 6) or a batch (n, L, 6) and
    returns the synthesized frame(s).
    """

    def __init__(self, backend: str = "analytic", sigma_interp=None, alpha: float = 0.5,
                 weights=None):
        self.backend = backend
        self.sigma_interp = sigma_interp
        self.alpha = alpha
        self.weights = weights

    def fit(self, key_frame, key_descriptors):
        config = self._config()
        self.key_frame_ = np.array(check_image(key_frame, "key frame"))
        positions, covariances = unpack_descriptors(check_descriptors(key_descriptors))
        if positions.ndim != 2:
            raise InvalidInputError(
                f"key descriptors must have shape (L, 6), got {positions.shape[:-1] + (6,)}"
            )
        self.key_positions_ = positions
        self.key_covariances_ = covariances
        self.config_ = config
        return self

    def predict(self, descriptors) -> np.ndarray:
        if not hasattr(self, "key_frame_"):
            raise NotFittedError("MotionFrameSynthesizer must be fitted with a key frame first")
        arr = check_descriptors(descriptors)
        if arr.ndim == 2:
            return self._synthesize(arr)
        if arr.ndim == 3:
            return np.stack([self._synthesize(frame) for frame in arr])
        raise InvalidInputError(
            f"descriptors must have shape (L, 6) or (n, L, 6), got {arr.shape}"
        )

    def _synthesize(self, packed: np.ndarray) -> np.ndarray:
        positions, covariances = unpack_descriptors(packed)
        return synthesize_frame(
            self.key_frame_,
            self.key_positions_,
            self.key_covariances_,
            positions,
            covariances,
            self.config_,
        )

    def _config(self) -> SynthesisConfig:
        return SynthesisConfig(
            variant=self.backend,
            sigma_interp=self.sigma_interp,
            alpha=self.alpha,
            weights=self.weights,
        )
