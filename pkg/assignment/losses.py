"""
Module: losses
Component losses of the matching cost, each with its analytic gradient.

Every ``*_grad`` function returns ``(value, gradient)`` with the gradient taken
w.r.t. the first argument.
"""
from typing import Tuple

import numpy as np
from scipy.spatial import cKDTree

from geometry.quadric import FROBENIUS_WEIGHTS

__all__ = ('clamp_probs', 'bce_loss', 'bce_loss_grad', 'dice_loss', 'dice_loss_grad', 'nll', 'nll_grad',
           'chamfer', 'chamfer_grad', 'normalize_coeffs', 'normalize_coeffs_backward',
           'parameter_l1', 'parameter_l1_grad', 'DICE_SMOOTHING')

DICE_SMOOTHING = 1.0
DEFAULT_CLAMP = 1e-7


def clamp_probs(probs, clamp: float = DEFAULT_CLAMP) -> Tuple[np.ndarray, np.ndarray]:
    """Clamped probabilities and the mask of entries left untouched by the clamp."""
    p = np.asarray(probs, dtype=np.float64)
    clamped = np.clip(p, clamp, 1.0 - clamp)
    return clamped, (p > clamp) & (p < 1.0 - clamp)


def bce_loss(probs, target, clamp: float = DEFAULT_CLAMP) -> float:
    """Mean binary cross-entropy of ``probs`` against the 0/1 vector ``target``."""
    return bce_loss_grad(probs, target, clamp)[0]


def bce_loss_grad(probs, target, clamp: float = DEFAULT_CLAMP) -> Tuple[float, np.ndarray]:
    p, live = clamp_probs(probs, clamp)
    t = np.asarray(target, dtype=np.float64)
    value = -float(np.mean(t * np.log(p) + (1.0 - t) * np.log(1.0 - p)))
    grad = -(t / p - (1.0 - t) / (1.0 - p)) / len(p)
    return value, np.where(live, grad, 0.0)


def dice_loss(probs, target, clamp: float = DEFAULT_CLAMP) -> float:
    """1 − (2·Σpt + s) / (Σp + Σt + s) with smoothing s = 1."""
    return dice_loss_grad(probs, target, clamp)[0]


def dice_loss_grad(probs, target, clamp: float = DEFAULT_CLAMP) -> Tuple[float, np.ndarray]:
    p, live = clamp_probs(probs, clamp)
    t = np.asarray(target, dtype=np.float64)
    numerator = 2.0 * float(p @ t) + DICE_SMOOTHING
    denominator = float(p.sum() + t.sum()) + DICE_SMOOTHING
    grad = -(2.0 * t * denominator - numerator) / denominator ** 2
    return 1.0 - numerator / denominator, np.where(live, grad, 0.0)


def nll(prob: float, clamp: float = DEFAULT_CLAMP) -> float:
    return nll_grad(prob, clamp)[0]


def nll_grad(prob: float, clamp: float = DEFAULT_CLAMP) -> Tuple[float, float]:
    """−log p with p clamped; the gradient vanishes where the clamp is active."""
    p = min(max(float(prob), clamp), 1.0 - clamp)
    live = clamp < float(prob) < 1.0 - clamp
    return -float(np.log(p)), (-1.0 / p if live else 0.0)


def _nearest(source: np.ndarray, reference: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    dist, idx = cKDTree(reference).query(source, k=1)
    return np.asarray(dist, dtype=np.float64), np.asarray(idx, dtype=np.int64)


def chamfer(a: np.ndarray, b: np.ndarray) -> float:
    """½·(mean_a min_b ‖a−b‖ + mean_b min_a ‖a−b‖); both sets non-empty."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 3)
    forward, _ = _nearest(a, b)
    backward, _ = _nearest(b, a)
    return 0.5 * (float(forward.mean()) + float(backward.mean()))


def chamfer_grad(a: np.ndarray, b: np.ndarray) -> Tuple[float, np.ndarray]:
    """Chamfer value and its gradient w.r.t. the points of ``a`` (nearest pairs held fixed)."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 3)
    forward, to_b = _nearest(a, b)
    backward, to_a = _nearest(b, a)
    value = 0.5 * (float(forward.mean()) + float(backward.mean()))

    grad = np.zeros_like(a)
    diff = a - b[to_b]
    safe = forward > 0
    grad[safe] += 0.5 * diff[safe] / forward[safe, None] / len(a)
    diff = a[to_a] - b
    safe = backward > 0
    np.add.at(grad, to_a[safe], 0.5 * diff[safe] / backward[safe, None] / len(b))
    return value, grad


def normalize_coeffs(coeffs) -> np.ndarray:
    """Scales raw coefficients to ‖A‖_F = 1 (no sign fix; callers compare both signs)."""
    c = np.asarray(coeffs, dtype=np.float64)
    return c / np.sqrt(np.sum(FROBENIUS_WEIGHTS * c * c))


def normalize_coeffs_backward(coeffs, grad_normalized) -> np.ndarray:
    """Pulls a gradient w.r.t. the normalized vector back to the raw coefficients."""
    c = np.asarray(coeffs, dtype=np.float64)
    g = np.asarray(grad_normalized, dtype=np.float64)
    norm = np.sqrt(np.sum(FROBENIUS_WEIGHTS * c * c))
    return g / norm - (FROBENIUS_WEIGHTS * c) * (c @ g) / norm ** 3


def parameter_l1(coeffs, target_coeffs) -> float:
    return parameter_l1_grad(coeffs, target_coeffs)[0]


def parameter_l1_grad(coeffs, target_coeffs) -> Tuple[float, np.ndarray]:
    """
    min over s ∈ {+1, −1} of ‖n(c) − s·θ‖₁ with n the Frobenius normalization.

    The gradient is w.r.t. the raw coefficients ``c``.
    """
    n = normalize_coeffs(coeffs)
    theta = np.asarray(target_coeffs, dtype=np.float64)
    plus, minus = np.abs(n - theta).sum(), np.abs(n + theta).sum()
    sign = 1.0 if plus <= minus else -1.0
    residual = n - sign * theta
    return float(min(plus, minus)), normalize_coeffs_backward(coeffs, np.sign(residual))
