"""
Module: matching
Pair costs between predicted candidates and ground-truth primitives, and the
Hungarian assignment with a deterministic tie-break.
"""
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from assignment.errors import NonFinite
from assignment.losses import bce_loss, chamfer, dice_loss, nll, parameter_l1
from assignment.schemas import CandidateInput, CostWeights, MatchResult, PairTerms, PredictionView, TargetInput, \
    TargetView

__all__ = ('hungarian', 'pair_cost', 'cost_matrix', 'TIE_TOL')

TIE_TOL = 1e-10


def _solve(cost: np.ndarray) -> Tuple[float, List[Tuple[int, int]]]:
    """
    Optimal assignment of size min(rows, cols).

    Rectangular inputs are padded to square with a constant above every real
    cost; each optimum then uses the same number of padded cells.
    """
    rows, cols = cost.shape
    if rows == 0 or cols == 0:
        return 0.0, []
    size = max(rows, cols)
    pad = float(np.max(np.abs(cost))) + 1.0
    square = np.full((size, size), pad)
    square[:rows, :cols] = cost
    r, c = linear_sum_assignment(square)
    pairs = [(int(i), int(j)) for i, j in zip(r, c) if i < rows and j < cols]
    return float(sum(cost[i, j] for i, j in pairs)), pairs


def hungarian(cost) -> MatchResult:
    """
    Minimum-total-cost assignment between K candidates (rows) and G targets (columns).

    Among equal-cost optima the lexicographically smallest pair list (sorted by
    candidate) is returned: candidates are fixed in ascending order to the
    smallest target that still admits an optimal completion.

    Args:
        cost: K x G matrix of finite costs.

    Returns:
        MatchResult: min(K, G) pairs, 0-based.

    Raises:
        NonFinite: An entry is NaN or infinite.
    """
    matrix = np.asarray(cost, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError("cost must be a K x G matrix")
    if not np.all(np.isfinite(matrix)):
        raise NonFinite("cost matrix has NaN or infinite entries")
    rows, cols = matrix.shape
    optimum, _ = _solve(matrix)
    tol = TIE_TOL * (1.0 + abs(optimum))

    free_rows, free_cols = list(range(rows)), list(range(cols))
    fixed_cost, pairs, unmatched = 0.0, [], []
    for k in range(rows):
        free_rows.remove(k)
        chosen = None
        if free_cols:
            for g in free_cols:
                rest = [j for j in free_cols if j != g]
                rest_cost, _ = _solve(matrix[np.ix_(free_rows, rest)])
                if fixed_cost + matrix[k, g] + rest_cost <= optimum + tol:
                    chosen = g
                    break
        if chosen is None:
            unmatched.append(k)
            continue
        fixed_cost += matrix[k, chosen]
        pairs.append((k, chosen))
        free_cols.remove(chosen)
    return MatchResult(pairs=pairs, total=float(sum(matrix[k, g] for k, g in pairs)), unmatched=unmatched)


def pair_cost(candidate: CandidateInput, target: TargetInput, w: Optional[CostWeights] = None) -> PairTerms:
    """
    Matching cost of one (candidate, target) pair, term by term (weights applied).

    semantic:           α₁·(−log π[c_g])
    membership:         α₂·(CE + Dice)(m, I_g)
    primitive_chamfer:  α₃·CD(Ŷ_k, Y_g), or the empty-set penalty
    parameter:          α₃·λ·min_s ‖θ̂_k − s·θ_g‖₁
    """
    w = w or CostWeights()
    index = target.type_tag.class_index(candidate.type_count)
    terms = PairTerms(semantic=w.alpha1_pos * nll(candidate.probs[index], w.prob_clamp))
    membership = 0.0
    if w.use_ce:
        membership += bce_loss(candidate.membership, target.mask, w.prob_clamp)
    if w.use_dice:
        membership += dice_loss(candidate.membership, target.mask, w.prob_clamp)
    terms.membership = w.alpha2 * membership
    if w.use_primitive_chamfer:
        if len(candidate.points) == 0 or len(target.points) == 0:
            cd = w.empty_cd_penalty
        else:
            cd = chamfer(candidate.points, target.points)
        terms.primitive_chamfer = w.alpha3 * cd
    if w.use_parameter:
        terms.parameter = w.alpha3 * w.lambda_ * parameter_l1(candidate.coeffs, target.coeffs)
    return terms


def cost_matrix(pred: PredictionView, targets: TargetView, w: Optional[CostWeights] = None) \
        -> Tuple[np.ndarray, List[List[PairTerms]]]:
    """K x G pair costs and the matching grid of term breakdowns."""
    w = w or CostWeights()
    candidates = [pred.candidate(k) for k in range(pred.candidate_count)]
    target_inputs = [targets.target(g) for g in range(targets.target_count)]
    grid = [[pair_cost(c, t, w) for t in target_inputs] for c in candidates]
    costs = np.array([[terms.total for terms in row] for row in grid], dtype=np.float64)
    return costs.reshape(len(candidates), len(target_inputs)), grid
