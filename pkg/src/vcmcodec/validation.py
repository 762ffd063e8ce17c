"""Input validation helpers shared by the estimator API and the core functions."""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError

HEATMAP_SUM_TOL = 1e-6
PSD_EIG_TOL = -1e-9


def as_finite_array(values, name: str = "array") -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains NaN or Inf values")
    return arr


def check_grid(values, name: str = "grid") -> np.ndarray:
    """Validate a 2-D scalar field with at least one row and column."""
    arr = as_finite_array(values, name)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidInputError(f"{name} must be a 2-D array, got shape {arr.shape}")
    return arr


def check_heatmap(values, name: str = "heatmap") -> np.ndarray:
    """Validate a normalized heatmap: nonnegative and summing to 1."""
    arr = check_grid(values, name)
    if np.any(arr < 0):
        raise InvalidInputError(f"{name} has negative entries")
    total = float(arr.sum())
    if abs(total - 1.0) > HEATMAP_SUM_TOL:
        raise InvalidInputError(f"{name} sums to {total!r}, expected 1 within {HEATMAP_SUM_TOL}")
    return arr


def check_point(point, name: str = "point") -> np.ndarray:
    arr = as_finite_array(point, name)
    if arr.shape != (2,):
        raise InvalidInputError(f"{name} must have shape (2,), got {arr.shape}")
    return arr


def check_covariance(cov, name: str = "covariance") -> np.ndarray:
    """Validate a symmetric 2x2 covariance, PSD within a small tolerance."""
    arr = as_finite_array(cov, name)
    if arr.shape != (2, 2):
        raise InvalidInputError(f"{name} must have shape (2, 2), got {arr.shape}")
    if arr[0, 1] != arr[1, 0]:
        raise InvalidInputError(f"{name} is not symmetric")
    eigs = np.linalg.eigvalsh(arr)
    if eigs[0] < PSD_EIG_TOL:
        raise InvalidInputError(f"{name} is not positive semidefinite (min eigenvalue {eigs[0]!r})")
    return arr


def check_image(values, name: str = "image") -> np.ndarray:
    """Validate an image: (H, W) or (H, W, C) with C in {1, 3}, values in [0, 1]."""
    arr = as_finite_array(values, name)
    if arr.ndim == 3:
        if arr.shape[2] not in (1, 3):
            raise InvalidInputError(f"{name} must have 1 or 3 channels, got {arr.shape[2]}")
    elif arr.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D or 3-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidInputError(f"{name} has empty spatial dims {arr.shape}")
    if float(arr.min()) < 0.0 or float(arr.max()) > 1.0:
        raise InvalidInputError(f"{name} values must lie in [0, 1]")
    return arr


def check_flow(flow, height: int, width: int, name: str = "flow") -> np.ndarray:
    arr = as_finite_array(flow, name)
    if arr.shape != (height, width, 2):
        raise InvalidInputError(
            f"{name} must have shape ({height}, {width}, 2), got {arr.shape}"
        )
    return arr


def check_descriptors(values, name: str = "descriptors") -> np.ndarray:
    """Validate packed keypoint descriptors with trailing axis of 6 scalars."""
    arr = as_finite_array(values, name)
    if arr.ndim < 1 or arr.shape[-1] != 6:
        raise InvalidInputError(f"{name} must have a trailing axis of 6, got shape {arr.shape}")
    return arr
