"""
Module: training
Training step and loop: forward → online targets → matching → total loss →
backward → AdamW. Deterministic given seeds, including with worker threads.
"""
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from assignment.errors import NonFinite
from assignment.losses import chamfer_grad, parameter_l1
from assignment.objective import build_target_view, total_loss
from assignment.schemas import CostWeights, LossBreakdown, MatchResult, OutputGradients, PredictionView
from geometry.schemas import PrimitiveType
from logs.project_log import log_step, main_logger
from network.errors import NonFiniteLoss
from network.model import backward, forward, init_params, inlier_sets
from network.optimizer import adamw_update
from network.schemas import POINT_PATHWAY, ForwardOutput, ModelConfig, ModelParams, OptimizerConfig, \
    OptimizerState
from scene.schemas import LabeledCloud, PartialScan
from settings import settings
from targets.induction import induce_targets
from targets.schemas import PatchedPrediction, TargetAssignment

__all__ = ('Sample', 'TrainMode', 'train_step', 'Trainer', 'FitDiagnostics', 'diagnose', 'prediction_view')

Sample = Tuple[PartialScan, LabeledCloud]


class TrainMode:
    """Which pathway a step updates."""
    JOINT = "joint"
    POINTS = "points"
    PRIMITIVES = "primitives"


def prediction_view(output: ForwardOutput) -> PredictionView:
    return PredictionView(probs=output.probs, membership=output.membership, coeffs=output.coeffs,
                          patches=output.patches)


def _trainable(params: ModelParams, mode: str) -> List[str]:
    if mode == TrainMode.JOINT:
        return params.names
    in_points = [name for name in params.names if name.startswith(POINT_PATHWAY)]
    if mode == TrainMode.POINTS:
        return in_points
    return [name for name in params.names if name not in set(in_points)]


def _sample_pass(sample: Sample, params: ModelParams, w: CostWeights, mode: str,
                 assignment: Optional[TargetAssignment] = None) \
        -> Tuple[LossBreakdown, Dict[str, np.ndarray], ForwardOutput, TargetAssignment, MatchResult]:
    scan, cloud = sample
    output = forward(scan.points, params)
    if assignment is None:
        assignment = induce_targets(PatchedPrediction(patches=output.patches), cloud)
    try:
        breakdown, upstream, match = total_loss(prediction_view(output), build_target_view(assignment, cloud), w)
    except NonFinite as exc:
        raise NonFiniteLoss(exc.term or "cost_matrix", str(exc)) from None
    if mode == TrainMode.POINTS:
        _, d_points = chamfer_grad(output.completed, cloud.points)
        upstream = OutputGradients.zeros_like(prediction_view(output))
        upstream.d_patches = d_points.reshape(output.patches.shape)
    elif mode == TrainMode.PRIMITIVES:
        upstream.d_patches = np.zeros_like(upstream.d_patches)
    return breakdown, backward(output, upstream, params), output, assignment, match


def train_step(batch: Sequence[Sample], params: ModelParams, state: OptimizerState, w: CostWeights,
               opt: OptimizerConfig, epoch: int = 0, mode: str = TrainMode.JOINT,
               assignments: Optional[Sequence[TargetAssignment]] = None) \
        -> Tuple[ModelParams, OptimizerState, LossBreakdown]:
    """
    One optimization step over ``batch``; terms and gradients are averaged over samples.

    Targets are induced from the current prediction of every sample unless
    ``assignments`` supplies them, one per sample.

    Returns:
        Tuple[ModelParams, OptimizerState, LossBreakdown]

    Raises:
        NonFiniteLoss: A loss term or gradient diverged; nothing is updated.
    """
    if assignments is not None and len(assignments) != len(batch):
        raise ValueError("assignments must match the batch one to one")
    fixed = list(assignments) if assignments is not None else [None] * len(batch)
    workers = min(settings.worker_count, len(batch))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda pair: _sample_pass(pair[0], params, w, mode, pair[1]), zip(batch, fixed)))
    else:
        results = [_sample_pass(s, params, w, mode, a) for s, a in zip(batch, fixed)]

    # fixed-order reduction keeps threaded runs bit-identical to sequential ones
    grads = params.zeros()
    totals = dict.fromkeys(LossBreakdown.model_fields, 0.0)
    for breakdown, sample_grads, *_ in results:
        for key, value in breakdown.model_dump().items():
            totals[key] += value
        for name in grads:
            grads[name] += sample_grads[name]
    scale = 1.0 / len(batch)
    breakdown = LossBreakdown(**{k: v * scale for k, v in totals.items()})
    for name in grads:
        grads[name] *= scale
        if not np.all(np.isfinite(grads[name])):
            raise NonFiniteLoss(f"gradient:{name}")
    if not np.isfinite(breakdown.total):
        raise NonFiniteLoss("total")
    new_params, new_state = adamw_update(params, grads, state, opt, epoch, _trainable(params, mode))
    return new_params, new_state, breakdown


class FitDiagnostics(BaseModel):
    """
    Matching quality of a model on a dataset.

    Attributes:
        type_accuracy (float): Fraction of matched pairs whose arg max non-null type is right.
        membership_iou (float): Mean IoU between thresholded membership and target sets.
        parameter_l1 (float): Mean canonical-θ L1 over matched pairs.
        matched (int): Number of matched pairs.
    """
    type_accuracy: float
    membership_iou: float
    parameter_l1: float
    matched: int


def diagnose(dataset: Sequence[Sample], params: ModelParams, w: Optional[CostWeights] = None) -> FitDiagnostics:
    """Measures type accuracy, membership IoU and θ error of matched candidates."""
    w = w or CostWeights()
    correct, ious, l1s = 0, [], []
    type_count = params.config.type_count
    for scan, cloud in dataset:
        output = forward(scan.points, params)
        assignment = induce_targets(PatchedPrediction(patches=output.patches), cloud)
        _, _, match = total_loss(prediction_view(output), build_target_view(assignment, cloud), w)
        for k, g in match.pairs:
            predicted = PrimitiveType.from_index(int(np.argmax(output.probs[k, :-1])), type_count)
            correct += predicted is cloud.types[g]
            members = inlier_sets(output.membership[k])
            target = assignment.target_sets[g + 1]
            union = members | target
            ious.append(len(members & target) / len(union) if union else 1.0)
            l1s.append(parameter_l1(output.coeffs[k], cloud.primitives[g].quadric.vector))
    matched = len(ious)
    return FitDiagnostics(type_accuracy=correct / matched if matched else 0.0,
                          membership_iou=float(np.mean(ious)) if ious else 0.0,
                          parameter_l1=float(np.mean(l1s)) if l1s else 0.0, matched=matched)


class Trainer:
    """
    Runs ``train_step`` over a fixed dataset.

    Batches follow a per-epoch permutation seeded by the model seed, so a run
    resumed from a checkpoint continues exactly as an uninterrupted one.

    Attributes:
        model_cfg (ModelConfig): Architecture.
        opt (OptimizerConfig): Optimizer and schedule.
        weights (CostWeights): Loss weights.
        params (ModelParams): Current parameters.
        state (OptimizerState): Current optimizer state.
        two_stage (int): Steps of point-pathway-only training before switching to
            the primitive pathway only; 0 trains jointly.
        freeze_points (bool): Train the primitive pathway only.
        static_targets (bool): Induce each sample's targets once, from the prediction
            at its first step, and reuse them afterwards instead of re-inducing them
            every step.
        targets (Dict[int, TargetAssignment]): Static targets by dataset index.
    """

    def __init__(self, model_cfg: ModelConfig, opt: Optional[OptimizerConfig] = None,
                 weights: Optional[CostWeights] = None, params: Optional[ModelParams] = None,
                 state: Optional[OptimizerState] = None, two_stage: int = 0, freeze_points: bool = False,
                 static_targets: bool = False):
        self.model_cfg = model_cfg
        self.opt = opt or OptimizerConfig()
        self.weights = weights or CostWeights()
        self.params = params or init_params(model_cfg)
        self.state = state or OptimizerState.fresh(self.params)
        self.two_stage = two_stage
        self.freeze_points = freeze_points
        self.static_targets = static_targets
        self.targets: Dict[int, TargetAssignment] = {}

    def mode_at(self, step: int) -> str:
        if self.freeze_points:
            return TrainMode.PRIMITIVES
        if self.two_stage:
            return TrainMode.POINTS if step < self.two_stage else TrainMode.PRIMITIVES
        return TrainMode.JOINT

    def batch_at(self, n: int, step: int) -> Tuple[List[int], int]:
        """Dataset indices of the batch trained at ``step`` and its epoch."""
        size = self.opt.batch_size
        first = step * size
        indices = []
        for position in range(first, first + size):
            order = np.random.default_rng([self.model_cfg.seed, position // n]).permutation(n)
            indices.append(int(order[position % n]))
        return indices, first // n

    def _static(self, dataset: Sequence[Sample], indices: List[int]) -> List[TargetAssignment]:
        for i in indices:
            if i not in self.targets:
                scan, cloud = dataset[i]
                output = forward(scan.points, self.params)
                self.targets[i] = induce_targets(PatchedPrediction(patches=output.patches), cloud)
                main_logger.debug("static targets fixed for sample %d", i)
        return [self.targets[i] for i in indices]

    def fit(self, dataset: Sequence[Sample], steps: int, log_every: int = 50) -> List[Dict[str, object]]:
        """
        Trains for ``steps`` further steps.

        Returns:
            List[Dict[str, object]]: One loss record per step.
        """
        if not dataset:
            raise ValueError("dataset is empty")
        history = []
        start = self.state.step
        for step in range(start, start + steps):
            indices, epoch = self.batch_at(len(dataset), step)
            mode = self.mode_at(step)
            assignments = self._static(dataset, indices) if self.static_targets else None
            self.params, self.state, breakdown = train_step([dataset[i] for i in indices], self.params, self.state,
                                                            self.weights, self.opt, epoch, mode, assignments)
            record = {"step": step, "epoch": epoch, "lr": self.opt.rate(epoch), "mode": mode,
                      **breakdown.as_record()}
            log_step(record)
            history.append(record)
            if log_every and (step - start) % log_every == 0:
                main_logger.info("step %d epoch %d loss %.6f (%s)", step, epoch, breakdown.total, mode)
        return history
