"""
Module: evaluation
Per-shape evaluation reports, their aggregation and the RANSAC baseline.
"""
from typing import List, Optional, Sequence, Tuple

import numpy as np

from geometry.quadric import surface_normals
from geometry.ransac import ransac_extract
from geometry.schemas import BoundedPrimitive, RansacConfig
from inference.schemas import CandidateSet
from logs.project_log import main_logger
from metrics.errors import EmptySet
from metrics.geometric import UNIT_TOL, chamfer, fscore, hausdorff, normal_consistency
from metrics.primitive import eval_match, primitive_quality, sample_primitives
from metrics.schemas import SCALE, EvalConfig, EvalReport
from scene.schemas import LabeledCloud

__all__ = ('candidate_primitives', 'evaluate_shape', 'evaluate_ransac', 'aggregate')


def candidate_primitives(selected: CandidateSet) -> List[BoundedPrimitive]:
    """Bounded primitives of the selected candidates that carry a quadric and points."""
    return [BoundedPrimitive(quadric=c.quadric, support=c.points)
            for c in selected if c.quadric is not None and len(c.points)]


def _oriented(primitives: Sequence[BoundedPrimitive], samples: List[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    points = np.concatenate(samples)
    normals = np.concatenate([surface_normals(bp.quadric, s) for bp, s in zip(primitives, samples)])
    # zero rows mark vanishing gradients (cone apex)
    unit = np.abs(np.linalg.norm(normals, axis=1) - 1.0) <= UNIT_TOL
    return points[unit], normals[unit]


def evaluate_shape(pred: Sequence[BoundedPrimitive], cloud: LabeledCloud,
                   cfg: Optional[EvalConfig] = None) -> EvalReport:
    """
    Evaluates predicted primitives against a labeled ground-truth shape.

    Geometric metrics compare the union of surface samples of both primitive
    sets; primitive metrics use the Chamfer-based Hungarian matching.

    Args:
        pred (Sequence[BoundedPrimitive]): Predicted primitives.
        cloud (LabeledCloud): Ground truth.
        cfg (Optional[EvalConfig]): Sampling and tolerances.

    Returns:
        EvalReport: CD and HD ×100; Type, Res, Cov ×100.
    """
    cfg = cfg or EvalConfig()
    gt = cloud.primitives
    report = EvalReport(evaluated=len(pred), ground_truth=len(gt))
    if not pred or not gt:
        main_logger.warning("nothing to evaluate: %d predicted, %d ground-truth primitives", len(pred), len(gt))
        return report

    pred_samples = sample_primitives(pred, cfg.samples, cfg.seed)
    gt_samples = sample_primitives(gt, cfg.samples, cfg.seed)
    a, b = np.concatenate(pred_samples), np.concatenate(gt_samples)
    report.cd = SCALE * chamfer(a, b)
    report.hd = SCALE * hausdorff(a, b)
    report.fscore = fscore(a, b, cfg.tau)
    try:
        report.nc = normal_consistency(*_oriented(pred, pred_samples), *_oriented(gt, gt_samples))
    except EmptySet:
        main_logger.warning("no usable normals; normal consistency left empty")

    match = eval_match(pred, gt, cfg, pred_samples, gt_samples)
    quality = primitive_quality(match, pred, gt, cfg, pred_samples, gt_samples)
    report.primitive_f1 = quality.f1
    report.type_acc = quality.type_acc
    report.axis_deg = quality.axis_deg
    report.res = quality.res
    report.cov = quality.cov
    report.matched = quality.matched
    return report


def evaluate_ransac(points: np.ndarray, cloud: LabeledCloud, ransac: Optional[RansacConfig] = None,
                    cfg: Optional[EvalConfig] = None) -> EvalReport:
    """Extracts primitives from ``points`` with RANSAC and evaluates them."""
    return evaluate_shape(ransac_extract(points, ransac), cloud, cfg)


def _mean(values: List[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None]
    return float(np.mean(present)) if present else None


def aggregate(reports: Sequence[EvalReport]) -> EvalReport:
    """
    Mean over shapes; optional fields average over the shapes that have them,
    counts are summed.

    Raises:
        EmptySet: No report given.
    """
    if not reports:
        raise EmptySet("no reports to aggregate")
    means = {name: _mean([getattr(r, name) for r in reports])
             for name in ("cd", "hd", "nc", "fscore", "axis_deg", "res")}
    for name in ("primitive_f1", "type_acc", "cov"):
        means[name] = float(np.mean([getattr(r, name) for r in reports]))
    counts = {name: sum(getattr(r, name) for r in reports)
              for name in ("evaluated", "ground_truth", "matched", "shapes")}
    return EvalReport(**means, **counts)
