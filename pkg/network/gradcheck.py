"""
Module: gradcheck
Central finite-difference verification of the hand-written backward passes.

Two checks are combined:
- per layer: the analytic parameter gradients of a random linear functional of
  all network outputs against finite differences, on sampled entries of every
  tensor of that layer;
- objective: the total-loss gradients w.r.t. the network outputs against finite
  differences, with the online targets held fixed.
Chaining both covers the gradient of the total loss w.r.t. every parameter.
"""
from typing import Callable, List, Optional

import numpy as np
from pydantic import BaseModel

from assignment.objective import build_target_view, total_loss
from assignment.schemas import CostWeights, OutputGradients, PredictionView
from geometry.schemas import QUADRATIC_INDICES, PrimitiveType
from logs.project_log import main_logger
from network.model import backward, forward, init_params, layer_groups
from network.schemas import ModelConfig, ModelParams
from scene.generator import generate_shape
from scene.schemas import ShapeSpec
from targets.induction import induce_targets
from targets.schemas import PatchedPrediction

__all__ = ('LayerCheck', 'GradcheckReport', 'gradcheck', 'relative_error', 'STEP', 'ABS_FLOOR')

STEP = 1e-5
# denominators below this are treated as this, so near-zero gradients compare absolutely
ABS_FLOOR = 1e-4
_MEMBERSHIP_GUARD = 1e-3


class LayerCheck(BaseModel):
    """
    Worst finite-difference disagreement within one layer.

    Attributes:
        layer (str): Layer name, or ``objective`` for the loss-to-output check.
        max_rel_error (float): Largest relative error over the checked entries.
        worst_parameter (str): Tensor holding that entry.
        checked (int): Number of entries compared.
        passed (bool): ``max_rel_error`` is below the tolerance.
    """
    layer: str
    max_rel_error: float
    worst_parameter: str
    checked: int
    passed: bool


class GradcheckReport(BaseModel):
    """Per-layer results of one gradient check."""
    tol: float
    seed: int
    layers: List[LayerCheck]

    @property
    def passed(self) -> bool:
        return all(layer.passed for layer in self.layers)

    @property
    def worst(self) -> LayerCheck:
        return max(self.layers, key=lambda layer: layer.max_rel_error)


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic) + abs(numeric), ABS_FLOOR)


def _central(fn: Callable[[], float], array: np.ndarray, index: int) -> float:
    flat = array.reshape(-1)
    original = flat[index]
    flat[index] = original + STEP
    plus = fn()
    flat[index] = original - STEP
    minus = fn()
    flat[index] = original
    return (plus - minus) / (2.0 * STEP)


def _linear_objective(points: np.ndarray, params: ModelParams, upstream: OutputGradients) -> float:
    out = forward(points, params)
    return float(np.sum(upstream.d_probs * out.probs) + np.sum(upstream.d_membership * out.membership)
                 + np.sum(upstream.d_coeffs * out.coeffs) + np.sum(upstream.d_patches * out.patches))


def _check_layers(params: ModelParams, points: np.ndarray, rng: np.random.Generator, tol: float,
                  samples: int, corrupt: Optional[str]) -> List[LayerCheck]:
    out = forward(points, params)
    upstream = OutputGradients(d_probs=rng.normal(size=out.probs.shape),
                               d_membership=rng.normal(size=out.membership.shape),
                               d_coeffs=rng.normal(size=out.coeffs.shape),
                               d_patches=rng.normal(size=out.patches.shape))
    analytic = backward(out, upstream, params, corrupt=corrupt)
    reports = []
    for layer, names in layer_groups(params).items():
        worst, worst_name, checked = 0.0, names[0], 0
        for name in names:
            tensor = params.tensors[name]
            picks = rng.choice(tensor.size, size=min(samples, tensor.size), replace=False)
            for index in picks:
                numeric = _central(lambda: _linear_objective(points, params, upstream), tensor, int(index))
                error = relative_error(float(analytic[name].reshape(-1)[index]), numeric)
                checked += 1
                if error > worst:
                    worst, worst_name = error, name
        reports.append(LayerCheck(layer=layer, max_rel_error=worst, worst_parameter=worst_name,
                                  checked=checked, passed=worst < tol))
    return reports


def _check_objective(params: ModelParams, seed: int, rng: np.random.Generator, tol: float,
                     samples: int) -> LayerCheck:
    if params.config.plane_only:
        spec = ShapeSpec(primitive_count_range=(6, 6), type_mix={PrimitiveType.PLANE: 1.0},
                         point_count=256, seed=seed)
    else:
        spec = ShapeSpec(primitive_count_range=(6, 7), point_count=256, seed=seed)
    cloud = generate_shape(spec)
    out = forward(cloud.points, params)
    targets = build_target_view(induce_targets(PatchedPrediction(patches=out.patches), cloud), cloud)
    pred = PredictionView(probs=out.probs.copy(), membership=out.membership.copy(), coeffs=out.coeffs.copy(),
                          patches=out.patches.copy())
    weights = CostWeights()
    _, grads, _ = total_loss(pred, targets, weights)

    def loss() -> float:
        return total_loss(pred, targets, weights)[0].total

    worst, worst_name, checked = 0.0, "probs", 0
    for name in ("probs", "membership", "coeffs", "patches"):
        array, analytic = getattr(pred, name), getattr(grads, "d_" + name)
        picks = rng.choice(array.size, size=min(samples, array.size), replace=False)
        for index in picks:
            # a membership at the inlier threshold would switch inlier sets under the step
            if name == "membership" and abs(array.reshape(-1)[index] - 0.5) < _MEMBERSHIP_GUARD:
                continue
            # structurally zero coefficients sit on the kink of the L1 term
            if name == "coeffs" and params.config.plane_only and index % 10 in QUADRATIC_INDICES:
                continue
            numeric = _central(loss, array, int(index))
            error = relative_error(float(analytic.reshape(-1)[index]), numeric)
            checked += 1
            if error > worst:
                worst, worst_name = error, name
    return LayerCheck(layer="objective", max_rel_error=worst, worst_parameter=worst_name, checked=checked,
                      passed=worst < tol)


def gradcheck(cfg: ModelConfig, seed: int = 0, tol: float = 1e-4, corrupt: Optional[str] = None,
              samples: int = 4) -> GradcheckReport:
    """
    Checks every layer's backward and the loss gradients at a random point.

    Args:
        cfg (ModelConfig): Architecture; ``seed`` overrides its init seed.
        seed (int): Drives initialization, inputs and sampled entries.
        tol (float): Relative error bound.
        corrupt (Optional[str]): Layer whose backward is deliberately scaled (negative control).
        samples (int): Entries checked per tensor.

    Returns:
        GradcheckReport: One entry per layer plus ``objective``.
    """
    params = init_params(cfg.model_copy(update={"seed": seed}))
    rng = np.random.default_rng(seed)
    points = rng.uniform(-0.5, 0.5, size=(64, 3))
    layers = _check_layers(params, points, rng, tol, samples, corrupt)
    layers.append(_check_objective(params, seed, rng, tol, samples))
    report = GradcheckReport(tol=tol, seed=seed, layers=layers)
    worst = report.worst
    main_logger.info("gradcheck seed %d: %s, worst %.3g in %s", seed, "pass" if report.passed else "FAIL",
                     worst.max_rel_error, worst.worst_parameter)
    return report
