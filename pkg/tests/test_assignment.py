import itertools
from typing import List, Tuple

import numpy as np
import pytest

from assignment.errors import NonFinite
from assignment.losses import (bce_loss, bce_loss_grad, chamfer, chamfer_grad, dice_loss, dice_loss_grad,
                               parameter_l1, parameter_l1_grad)
from assignment.matching import cost_matrix, hungarian, pair_cost
from assignment.objective import total_loss
from assignment.schemas import CandidateInput, CostWeights, PredictionView, TargetInput, TargetView
from geometry.quadric import make_plane
from geometry.schemas import PrimitiveType


def numeric_grad(fn, x: np.ndarray, step: float = 1e-6) -> np.ndarray:
    grad = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        plus, minus = x.copy(), x.copy()
        plus[i] += step
        minus[i] -= step
        grad[i] = (fn(plus) - fn(minus)) / (2 * step)
    return grad


def brute_force(cost: np.ndarray) -> Tuple[float, List[Tuple[int, int]]]:
    """Optimal total and the lexicographically smallest optimal pair list, by enumeration."""
    rows, cols = cost.shape
    if rows <= cols:
        options = [[(i, p[i]) for i in range(rows)] for p in itertools.permutations(range(cols), rows)]
    else:
        options = [sorted((p[j], j) for j in range(cols)) for p in itertools.permutations(range(rows), cols)]
    totals = [sum(cost[i, j] for i, j in pairs) for pairs in options]
    best = min(totals)
    return best, min(pairs for pairs, total in zip(options, totals) if total <= best + 1e-9)


def random_instance(rng: np.random.Generator, candidates: int = 4, targets: int = 3, patches: int = 6) \
        -> Tuple[PredictionView, TargetView]:
    logits = rng.normal(size=(candidates, 5))
    probs = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
    pred = PredictionView(probs=probs, membership=rng.uniform(size=(candidates, patches)),
                          coeffs=rng.normal(size=(candidates, 10)), patches=rng.uniform(size=(patches, 2, 3)))
    types = [PrimitiveType.geometric()[i] for i in rng.integers(0, 4, targets)]
    view = TargetView(types=types, masks=rng.integers(0, 2, size=(targets, patches)).astype(float),
                      coeffs=rng.normal(size=(targets, 10)),
                      supports=[rng.uniform(size=(5, 3)) for _ in range(targets)], points=rng.uniform(size=(20, 3)))
    return pred, view


class TestLosses:
    def test_bce_floor(self):
        assert bce_loss([1.0, 0.0], [1, 0]) <= 1e-6

    def test_bce_half(self):
        assert bce_loss([0.5, 0.5, 0.5], [1, 0, 1]) == pytest.approx(np.log(2))

    def test_dice_values(self):
        assert dice_loss([1.0, 0.0], [1, 0]) == pytest.approx(0.0, abs=1e-6)
        assert dice_loss([0.5, 0.5], [1, 0]) == pytest.approx(1 / 3)
        assert dice_loss([0.0, 0.0], [0, 0]) == pytest.approx(0.0, abs=1e-6)

    def test_chamfer(self):
        assert chamfer([[0, 0, 0]], [[1, 0, 0]]) == pytest.approx(1.0)
        pts = np.random.default_rng(1).uniform(size=(20, 3))
        assert chamfer(pts, pts) == 0.0

    def test_parameter_l1_ignores_sign(self):
        theta = np.array(make_plane((0, 0, 1), 0.3).coeffs)
        assert parameter_l1(-4.0 * theta, theta) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("grad_fn", [bce_loss_grad, dice_loss_grad])
    def test_membership_gradients(self, grad_fn, rng):
        p = rng.uniform(0.1, 0.9, 6)
        t = np.array([1, 0, 1, 1, 0, 0], dtype=float)
        _, analytic = grad_fn(p, t)
        assert np.allclose(analytic, numeric_grad(lambda x: grad_fn(x, t)[0], p), atol=1e-7)

    def test_parameter_gradient(self, rng):
        c, theta = rng.normal(size=10), rng.normal(size=10)
        _, analytic = parameter_l1_grad(c, theta)
        assert np.allclose(analytic, numeric_grad(lambda x: parameter_l1(x, theta), c), atol=1e-6)

    def test_chamfer_gradient(self, rng):
        a, b = rng.uniform(size=(5, 3)), rng.uniform(size=(7, 3))
        _, analytic = chamfer_grad(a, b)
        assert np.allclose(analytic, numeric_grad(lambda x: chamfer(x, b), a), atol=1e-6)


class TestHungarian:
    def test_diagonal(self):
        match = hungarian([[1, 2], [2, 1]])
        assert match.pairs == [(0, 0), (1, 1)]
        assert match.total == 2

    def test_anti_diagonal(self):
        match = hungarian([[2, 1], [1, 2]])
        assert match.pairs == [(0, 1), (1, 0)]
        assert match.total == 2

    def test_ties_prefer_lexicographic_order(self):
        assert hungarian(np.ones((3, 3))).pairs == [(0, 0), (1, 1), (2, 2)]

    def test_more_candidates_than_targets(self):
        match = hungarian([[5, 5], [1, 9], [9, 1]])
        assert match.pairs == [(1, 0), (2, 1)]
        assert match.unmatched == [0]
        assert match.target_of(2) == 1
        assert match.target_of(0) is None

    def test_no_targets(self):
        match = hungarian(np.zeros((3, 0)))
        assert match.pairs == []
        assert match.unmatched == [0, 1, 2]

    @pytest.mark.parametrize("shape", [(1, 1), (2, 2), (3, 3), (4, 4), (5, 5), (6, 6), (1, 4), (4, 1),
                                       (2, 5), (5, 2), (3, 7), (7, 3), (4, 6), (6, 4), (5, 7), (7, 5)])
    @pytest.mark.parametrize("integer", [True, False])
    def test_matches_exhaustive_search(self, shape, integer):
        rng = np.random.default_rng(sum(shape) * 10 + integer)
        for _ in range(3):
            # small integer costs force many equal-cost optima
            cost = rng.integers(0, 4, size=shape).astype(float) if integer else rng.uniform(0, 5, size=shape)
            total, pairs = brute_force(cost)
            match = hungarian(cost)
            assert match.total == pytest.approx(total)
            assert match.pairs == pairs
            assert sorted(match.unmatched) == sorted(set(range(shape[0])) - {k for k, _ in pairs})

    def test_non_finite(self):
        with pytest.raises(NonFinite):
            hungarian([[1.0, np.nan]])


class TestPairCost:
    theta = np.array(make_plane((0, 0, 1), 0.0).coeffs)
    pts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], dtype=float)

    def test_perfect_candidate(self):
        candidate = CandidateInput(probs=np.eye(5)[0], membership=np.array([1.0, 0.0]), coeffs=self.theta,
                                   points=self.pts)
        target = TargetInput(type_tag=PrimitiveType.PLANE, mask=np.array([1.0, 0.0]), coeffs=self.theta,
                             points=self.pts)
        assert pair_cost(candidate, target).total < 1e-6

    def test_type_term_isolated(self):
        probs = np.array([0.4, 0.3, 0.1, 0.1, 0.1])
        candidate = CandidateInput(probs=probs, membership=np.array([0.7, 0.2]), coeffs=self.theta,
                                   points=self.pts)
        plane = TargetInput(type_tag=PrimitiveType.PLANE, mask=np.array([1.0, 0.0]), coeffs=self.theta,
                            points=self.pts)
        cylinder = plane.model_copy(update={"type_tag": PrimitiveType.CYLINDER})
        w = CostWeights()
        difference = pair_cost(candidate, plane, w).total - pair_cost(candidate, cylinder, w).total
        assert difference == pytest.approx(w.alpha1_pos * (np.log(0.3) - np.log(0.4)))

    def test_empty_inliers_use_penalty(self):
        candidate = CandidateInput(probs=np.eye(5)[0], membership=np.array([0.1, 0.1]), coeffs=self.theta,
                                   points=np.zeros((0, 3)))
        target = TargetInput(type_tag=PrimitiveType.PLANE, mask=np.array([1.0, 0.0]), coeffs=self.theta,
                             points=self.pts)
        w = CostWeights(empty_cd_penalty=2.0)
        assert pair_cost(candidate, target, w).primitive_chamfer == pytest.approx(2.0)

    def test_ablation_switches(self):
        candidate = CandidateInput(probs=np.eye(5)[0], membership=np.array([0.3, 0.6]), coeffs=-self.theta,
                                   points=self.pts + 0.1)
        target = TargetInput(type_tag=PrimitiveType.PLANE, mask=np.array([1.0, 0.0]), coeffs=self.theta,
                             points=self.pts)
        terms = pair_cost(candidate, target, CostWeights(use_ce=False, use_dice=False, use_parameter=False))
        assert terms.membership == 0.0
        assert terms.parameter == 0.0
        assert terms.primitive_chamfer > 0.0

    def test_lambda_alias(self):
        assert CostWeights.model_validate({"lambda": 0.2}).lambda_ == 0.2
        assert CostWeights(lambda_=0.3).model_dump(by_alias=True)["lambda"] == 0.3


class TestTotalLoss:
    theta = np.array(make_plane((0, 0, 1), 0.0).coeffs)
    pts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], dtype=float)

    def _targets(self, count: int) -> TargetView:
        return TargetView(types=[PrimitiveType.PLANE] * count, masks=np.ones((count, 2)),
                          coeffs=np.tile(self.theta, (count, 1)), supports=[self.pts] * count, points=self.pts)

    def test_perfect_prediction(self):
        pred = PredictionView(probs=np.array([np.eye(5)[0], np.eye(5)[4]]), membership=np.array([[1.0, 1.0],
                                                                                                  [0.0, 0.0]]),
                              coeffs=np.stack([self.theta, np.ones(10)]), patches=self.pts.reshape(2, 2, 3))
        breakdown, grads, match = total_loss(pred, self._targets(1))
        assert match.pairs == [(0, 0)]
        assert match.unmatched == [1]
        assert breakdown.total < 1e-4
        assert grads.d_patches.shape == (2, 2, 3)

    def test_no_active_targets(self):
        probs = np.full((2, 5), 0.2)
        pred = PredictionView(probs=probs, membership=np.full((2, 2), 0.4), coeffs=np.ones((2, 10)),
                              patches=(self.pts + 0.5).reshape(2, 2, 3))
        targets = TargetView(types=[], masks=np.zeros((0, 2)), coeffs=np.zeros((0, 10)), supports=[],
                             points=self.pts)
        w = CostWeights()
        breakdown, grads, match = total_loss(pred, targets, w)
        assert match.pairs == []
        assert breakdown.semantic == 0.0 and breakdown.membership == 0.0
        assert breakdown.null == pytest.approx(2 * w.alpha1_null * -np.log(0.2))
        assert breakdown.total == pytest.approx(chamfer(pred.patches.reshape(-1, 3), self.pts) + breakdown.null)
        assert np.all(grads.d_membership == 0.0)

    def test_null_gradient(self):
        pred = PredictionView(probs=np.full((1, 5), 0.2), membership=np.full((1, 2), 0.4), coeffs=np.ones((1, 10)),
                              patches=self.pts.reshape(2, 2, 3))
        targets = TargetView(types=[], masks=np.zeros((0, 2)), coeffs=np.zeros((0, 10)), supports=[],
                             points=self.pts)
        w = CostWeights()
        _, grads, _ = total_loss(pred, targets, w)
        assert grads.d_probs[0, 4] == pytest.approx(-w.alpha1_null / 0.2)
        assert np.all(grads.d_probs[0, :4] == 0.0)

    def test_candidate_order_does_not_change_the_loss(self, rng):
        pred, targets = random_instance(rng)
        order = rng.permutation(pred.candidate_count)
        shuffled = PredictionView(probs=pred.probs[order], membership=pred.membership[order],
                                  coeffs=pred.coeffs[order], patches=pred.patches)
        base, _, match = total_loss(pred, targets)
        moved, _, moved_match = total_loss(shuffled, targets)
        assert moved.total == pytest.approx(base.total, rel=1e-12)
        position = np.argsort(order)
        assert sorted((int(position[k]), g) for k, g in match.pairs) == moved_match.pairs

    def test_target_order_permutes_the_matching(self, rng):
        pred, targets = random_instance(rng)
        order = rng.permutation(targets.target_count)
        shuffled = TargetView(types=[targets.types[g] for g in order], masks=targets.masks[order],
                              coeffs=targets.coeffs[order], supports=[targets.supports[g] for g in order],
                              points=targets.points)
        base, _, match = total_loss(pred, targets)
        moved, _, moved_match = total_loss(pred, shuffled)
        assert moved.total == pytest.approx(base.total, rel=1e-12)
        position = np.argsort(order)
        assert [(k, int(position[g])) for k, g in match.pairs] == moved_match.pairs

    @pytest.mark.parametrize("seed", range(3))
    def test_matching_is_exhaustive_optimum(self, seed):
        pred, targets = random_instance(np.random.default_rng(seed))
        costs, _ = cost_matrix(pred, targets)
        total, pairs = brute_force(costs)
        breakdown, _, match = total_loss(pred, targets)
        assert match.pairs == pairs
        assert match.total == pytest.approx(total)
        assert breakdown.total == pytest.approx(match.total + breakdown.null + breakdown.completion)
