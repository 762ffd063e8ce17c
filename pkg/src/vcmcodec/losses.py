"""Training losses as pure functions with hand-derived gradients, plus a
central finite-difference checker for those gradients.

The loss set: an L1 keypoint supervision term over 16 skeleton points per
sample, least-squares adversarial terms for discriminator and generator,
an L1 feature-matching term summed over discriminator layers, and their
weighted total (point weight 20, feature weight 10 by default).
"""

from __future__ import annotations

import dataclasses
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidInputError, PreconditionError
from .validation import as_finite_array

POINTS_PER_BODY = 16
DEFAULT_POINT_WEIGHT = 20.0
DEFAULT_MATCHING_WEIGHT = 10.0


@dataclasses.dataclass(frozen=True)
class LossWeights:
    point: float = DEFAULT_POINT_WEIGHT
    matching: float = DEFAULT_MATCHING_WEIGHT

    def __post_init__(self):
        if self.point < 0 or self.matching < 0:
            raise InvalidInputError("loss weights must be nonnegative")


def _check_point_batch(values, name) -> np.ndarray:
    arr = as_finite_array(values, name)
    if arr.ndim != 3 or arr.shape[1] != POINTS_PER_BODY or arr.shape[2] != 2:
        raise InvalidInputError(
            f"{name} must have shape (n, {POINTS_PER_BODY}, 2), got {arr.shape}"
        )
    if arr.shape[0] < 1:
        raise InvalidInputError(f"{name} needs at least one sample")
    return arr


def point_loss(predicted, labels) -> float:
    """Mean-over-samples sum of per-point L1 distances (|dx| + |dy|)."""
    pred = _check_point_batch(predicted, "predicted points")
    lab = _check_point_batch(labels, "label points")
    if pred.shape != lab.shape:
        raise InvalidInputError(f"batch shapes disagree: {pred.shape} vs {lab.shape}")
    return float(np.abs(pred - lab).sum() / pred.shape[0])


def point_loss_grad(predicted, labels) -> np.ndarray:
    """Gradient of point_loss wrt the predictions; sign convention 0 at 0."""
    pred = _check_point_batch(predicted, "predicted points")
    lab = _check_point_batch(labels, "label points")
    return np.sign(pred - lab) / pred.shape[0]


def _check_scores(scores, name) -> np.ndarray:
    arr = as_finite_array(scores, name)
    if arr.size == 0:
        raise InvalidInputError(f"{name} is empty")
    return arr


def lsgan_discriminator_loss(real_scores, fake_scores) -> float:
    """mean[(real - 1)^2] + mean[fake^2]; zero for a perfect discriminator."""
    real = _check_scores(real_scores, "real scores")
    fake = _check_scores(fake_scores, "fake scores")
    return float(np.mean((real - 1.0) ** 2) + np.mean(fake ** 2))


def lsgan_discriminator_grads(real_scores, fake_scores) -> tuple[np.ndarray, np.ndarray]:
    real = _check_scores(real_scores, "real scores")
    fake = _check_scores(fake_scores, "fake scores")
    return 2.0 * (real - 1.0) / real.size, 2.0 * fake / fake.size


def lsgan_generator_loss(fake_scores) -> float:
    """mean[(fake - 1)^2]; zero when the generator fully fools the critic."""
    fake = _check_scores(fake_scores, "fake scores")
    return float(np.mean((fake - 1.0) ** 2))


def lsgan_generator_grad(fake_scores) -> np.ndarray:
    fake = _check_scores(fake_scores, "fake scores")
    return 2.0 * (fake - 1.0) / fake.size


def feature_matching_loss(real_features: Sequence, fake_features: Sequence) -> float:
    """Sum over layers of the mean absolute feature difference."""
    if len(real_features) != len(fake_features):
        raise InvalidInputError(
            f"layer counts disagree: {len(real_features)} vs {len(fake_features)}"
        )
    if len(real_features) == 0:
        raise InvalidInputError("feature lists are empty")
    total = 0.0
    for i, (real, fake) in enumerate(zip(real_features, fake_features)):
        r = as_finite_array(real, f"real features[{i}]")
        f = as_finite_array(fake, f"fake features[{i}]")
        if r.shape != f.shape:
            raise InvalidInputError(
                f"feature shapes disagree at layer {i}: {r.shape} vs {f.shape}"
            )
        total += float(np.mean(np.abs(r - f)))
    return total


def feature_matching_grad(real_features: Sequence, fake_features: Sequence) -> list[np.ndarray]:
    """Per-layer gradient wrt the fake features."""
    grads = []
    for real, fake in zip(real_features, fake_features):
        r = np.asarray(real, dtype=np.float64)
        f = np.asarray(fake, dtype=np.float64)
        grads.append(np.sign(f - r) / f.size)
    return grads


def total_loss(
    point: float,
    matching: float,
    generator: float,
    weights: LossWeights = LossWeights(),
) -> float:
    """Weighted combination: point_weight * point + matching_weight * matching + generator."""
    for name, value in (("point", point), ("matching", matching), ("generator", generator)):
        if not np.isfinite(value):
            raise InvalidInputError(f"{name} loss is not finite: {value!r}")
    return weights.point * point + weights.matching * matching + generator


def finite_difference_check(
    loss_fn: Callable[[np.ndarray], float],
    x,
    analytic_grad,
    step: float = 1e-4,
    kink_tol: float = 1e-2,
) -> float:
    """Max relative error between ``analytic_grad`` and central differences.

    Raises PreconditionError when the one-sided differences disagree, which
    flags evaluation at (or across) a nonsmooth point such as an L1 kink.
    """
    base = as_finite_array(x, "inputs").copy()
    grad = as_finite_array(analytic_grad, "analytic gradient")
    if grad.shape != base.shape:
        raise InvalidInputError(f"gradient shape {grad.shape} != input shape {base.shape}")
    f0 = float(loss_fn(base))
    worst = 0.0
    for idx in np.ndindex(base.shape):
        bumped = base.copy()
        bumped[idx] += step
        f_plus = float(loss_fn(bumped))
        bumped[idx] -= 2.0 * step
        f_minus = float(loss_fn(bumped))
        central = (f_plus - f_minus) / (2.0 * step)
        forward = (f_plus - f0) / step
        backward = (f0 - f_minus) / step
        if abs(forward - backward) > kink_tol * (1.0 + abs(central)):
            raise PreconditionError(
                f"loss is not smooth at index {idx}: one-sided slopes "
                f"{forward:.6g} vs {backward:.6g}"
            )
        denom = max(abs(grad[idx]), abs(central), 1e-8)
        worst = max(worst, abs(grad[idx] - central) / denom)
    return worst
