"""Keypoint quantization: positions on a uniform lattice, covariances via
their quantized inverse matrices.

Positions quantize directly with a configurable step. Covariances are
inverted first and the four inverse entries quantized; on the way back the
inverse is symmetrized, its eigenvalues floored, and the matrix inverted
again. The floor bounds reconstruction when small inverse entries quantize
to zero (a point spread can only grow up to ``MAX_VARIANCE``).
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError
from .heatmaps import COV_EPSILON
from .validation import as_finite_array

POSITION_STEP = 2.0
COVARIANCE_STEP = 64.0

# Largest representable variance after decode; the inverse-eigenvalue floor.
MAX_VARIANCE = 1e4
MIN_INVERSE_EIG = 1.0 / MAX_VARIANCE


def round_half_away(values) -> np.ndarray:
    """Round to the nearest integer, ties away from zero."""
    arr = np.asarray(values, dtype=np.float64)
    return (np.floor(np.abs(arr) + 0.5) * np.sign(arr)).astype(np.int64)


def quantize_positions(positions, step: float = POSITION_STEP) -> np.ndarray:
    """Quantize ``(..., 2)`` pixel positions to signed lattice indices."""
    arr = as_finite_array(positions, "positions")
    if arr.shape[-1] != 2:
        raise InvalidInputError(f"positions must end in axis of 2, got shape {arr.shape}")
    _check_step(step)
    return round_half_away(arr / step)


def dequantize_positions(qpos, step: float = POSITION_STEP) -> np.ndarray:
    return np.asarray(qpos, dtype=np.float64) * step


def regularize_covariances(covs, eps: float = COV_EPSILON) -> np.ndarray:
    """Batched variant of the epsilon floor used before matrix inversion."""
    arr = as_finite_array(covs, "covariances")
    if arr.shape[-2:] != (2, 2):
        raise InvalidInputError(f"covariances must end in (2, 2), got shape {arr.shape}")
    arr = arr.copy()
    mean = (arr[..., 0, 0] + arr[..., 1, 1]) / 2.0
    radius = np.hypot((arr[..., 0, 0] - arr[..., 1, 1]) / 2.0, arr[..., 0, 1])
    needs = (mean - radius) < eps
    arr[needs] += eps * np.eye(2)
    return arr


def _invert_sym_2x2(mats: np.ndarray) -> np.ndarray:
    det = mats[..., 0, 0] * mats[..., 1, 1] - mats[..., 0, 1] * mats[..., 1, 0]
    if np.any(det <= 0):
        raise InvalidInputError("covariance not invertible after regularization")
    inv = np.empty_like(mats)
    inv[..., 0, 0] = mats[..., 1, 1] / det
    inv[..., 1, 1] = mats[..., 0, 0] / det
    inv[..., 0, 1] = -mats[..., 0, 1] / det
    inv[..., 1, 0] = inv[..., 0, 1]
    return inv


def quantize_covariances(covs, step: float = COVARIANCE_STEP) -> np.ndarray:
    """Quantize the four inverse-covariance entries of ``(..., 2, 2)`` matrices."""
    _check_step(step)
    regular = regularize_covariances(covs)
    inverse = _invert_sym_2x2(regular)
    return round_half_away(inverse / step)


def floor_inverse_eigenvalues(mats, min_eig: float = MIN_INVERSE_EIG) -> np.ndarray:
    """Clamp eigenvalues of symmetric ``(..., 2, 2)`` matrices from below."""
    arr = np.asarray(mats, dtype=np.float64)
    eigvals, eigvecs = np.linalg.eigh(arr)
    eigvals = np.maximum(eigvals, min_eig)
    out = np.einsum("...ij,...j,...kj->...ik", eigvecs, eigvals, eigvecs)
    out[..., 1, 0] = out[..., 0, 1]  # exact symmetry despite rounding
    return out


def dequantize_inverse_covariances(qicov, step: float = COVARIANCE_STEP) -> np.ndarray:
    """Rebuild the floored inverse-covariance matrices from quantized entries.

    The off-diagonal entries are averaged so the result is exactly symmetric
    regardless of what arrived on the wire.
    """
    arr = np.asarray(qicov, dtype=np.float64) * step
    if arr.shape[-2:] != (2, 2):
        raise InvalidInputError(f"quantized inverses must end in (2, 2), got shape {arr.shape}")
    off = (arr[..., 0, 1] + arr[..., 1, 0]) / 2.0
    arr[..., 0, 1] = off
    arr[..., 1, 0] = off
    return floor_inverse_eigenvalues(arr)


def dequantize_covariances(qicov, step: float = COVARIANCE_STEP) -> np.ndarray:
    """Recover covariance matrices by inverting the floored quantized inverses."""
    inverse = dequantize_inverse_covariances(qicov, step)
    return _invert_sym_2x2(inverse)


def _check_step(step: float) -> None:
    if not np.isfinite(step) or step <= 0:
        raise InvalidInputError(f"quantization step must be positive, got {step!r}")
