"""
Module: objective
Total training loss over one shape: matched pair costs, no-object terms for
unmatched candidates and the completion Chamfer, with gradients w.r.t. every
network output.
"""
from typing import Optional, Tuple

import numpy as np

from assignment.errors import NonFinite
from assignment.losses import bce_loss_grad, chamfer_grad, dice_loss_grad, nll_grad, parameter_l1_grad
from assignment.matching import cost_matrix, hungarian
from assignment.schemas import CostWeights, LossBreakdown, MatchResult, OutputGradients, PredictionView, TargetView
from geometry.schemas import PrimitiveType
from scene.schemas import LabeledCloud
from targets.schemas import TargetAssignment

__all__ = ('build_target_view', 'total_loss')


def build_target_view(assignment: TargetAssignment, cloud: LabeledCloud) -> TargetView:
    """Packs online targets and ground truth into the loss-side view."""
    ids = range(1, cloud.primitive_count + 1)
    return TargetView(
        types=cloud.types,
        masks=np.stack([assignment.mask(g) for g in ids]),
        coeffs=np.stack([prim.quadric.vector for prim in cloud.primitives]),
        supports=[cloud.support_of(g) for g in ids],
        points=cloud.points,
    )


def _matched_terms(pred: PredictionView, targets: TargetView, k: int, g: int, w: CostWeights,
                   breakdown: LossBreakdown, grads: OutputGradients):
    candidate, target = pred.candidate(k), targets.target(g)
    index = target.type_tag.class_index(candidate.type_count)
    value, d_prob = nll_grad(candidate.probs[index], w.prob_clamp)
    breakdown.semantic += w.alpha1_pos * value
    grads.d_probs[k, index] += w.alpha1_pos * d_prob

    if w.use_ce:
        value, d_m = bce_loss_grad(candidate.membership, target.mask, w.prob_clamp)
        breakdown.membership += w.alpha2 * value
        grads.d_membership[k] += w.alpha2 * d_m
    if w.use_dice:
        value, d_m = dice_loss_grad(candidate.membership, target.mask, w.prob_clamp)
        breakdown.membership += w.alpha2 * value
        grads.d_membership[k] += w.alpha2 * d_m

    if w.use_primitive_chamfer:
        if len(candidate.points) == 0 or len(target.points) == 0:
            breakdown.primitive_chamfer += w.alpha3 * w.empty_cd_penalty
        else:
            value, d_points = chamfer_grad(candidate.points, target.points)
            breakdown.primitive_chamfer += w.alpha3 * value
            inliers = pred.inlier_patches(k)
            patch_size = pred.patches.shape[1]
            grads.d_patches[inliers] += w.alpha3 * d_points.reshape(len(inliers), patch_size, 3)
    if w.use_parameter:
        value, d_c = parameter_l1_grad(candidate.coeffs, target.coeffs)
        breakdown.parameter += w.alpha3 * w.lambda_ * value
        grads.d_coeffs[k] += w.alpha3 * w.lambda_ * d_c


def total_loss(pred: PredictionView, targets: TargetView, w: Optional[CostWeights] = None) \
        -> Tuple[LossBreakdown, OutputGradients, MatchResult]:
    """
    Loss of one shape.

    Σ over matched pairs of the pair cost, plus α₁_null·(−log π_k[∅]) for every
    unmatched candidate, plus CD(Ŷ, Y) between all completed and ground-truth points.

    Returns:
        Tuple[LossBreakdown, OutputGradients, MatchResult]

    Raises:
        NonFinite: The cost matrix or a loss term is not finite.
    """
    w = w or CostWeights()
    costs, grid = cost_matrix(pred, targets, w)
    match = hungarian(costs)
    match.terms = {k: grid[k][g] for k, g in match.pairs}

    breakdown = LossBreakdown()
    grads = OutputGradients.zeros_like(pred)
    for k, g in match.pairs:
        _matched_terms(pred, targets, k, g, w, breakdown, grads)

    null_index = PrimitiveType.NULL.class_index(pred.probs.shape[1])
    for k in match.unmatched:
        value, d_prob = nll_grad(pred.probs[k, null_index], w.prob_clamp)
        breakdown.null += w.alpha1_null * value
        grads.d_probs[k, null_index] += w.alpha1_null * d_prob

    value, d_points = chamfer_grad(pred.patches.reshape(-1, 3), targets.points)
    breakdown.completion = value
    grads.d_patches += d_points.reshape(pred.patches.shape)

    for name, term in breakdown.model_dump().items():
        if not np.isfinite(term):
            raise NonFinite(f"loss term {name} is not finite", term=name)
    return breakdown, grads, match
