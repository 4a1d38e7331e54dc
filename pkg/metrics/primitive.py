"""
Module: primitive
Evaluation-time matching and primitive quality (F1, Type, Axis, Res, Cov).
"""
from typing import List, Optional, Sequence

import numpy as np

from assignment.matching import hungarian
from assignment.schemas import MatchResult
from geometry.errors import EmptyIntersection
from geometry.quadric import axis_of, distances
from geometry.sampling import project_points, sample_surface
from geometry.schemas import BoundedPrimitive, PrimitiveType
from logs.project_log import main_logger
from metrics.errors import EmptySet, NoAxisPairs
from metrics.geometric import chamfer, fscore
from metrics.schemas import SCALE, EvalConfig, PrimitiveQuality

__all__ = ('sample_primitive', 'sample_primitives', 'eval_match', 'axis_error', 'primitive_quality')

_AXIS_TYPES = (PrimitiveType.PLANE, PrimitiveType.CYLINDER, PrimitiveType.CONE)


def sample_primitive(bp: BoundedPrimitive, n: int, seed: int) -> np.ndarray:
    """
    ``n`` surface samples inside the primitive's extent.

    When the surface misses the extent, the support points (resampled) are
    projected onto the surface instead.
    """
    try:
        return sample_surface(bp, n, seed)
    except EmptyIntersection:
        main_logger.debug("%s misses its extent, sampling projected support instead", bp.type_tag.value)
        rng = np.random.default_rng(seed)
        picks = bp.support[rng.choice(len(bp.support), size=n, replace=True)]
        return project_points(picks, bp.quadric)[0]


def sample_primitives(primitives: Sequence[BoundedPrimitive], n: int, seed: int) -> List[np.ndarray]:
    """Samples primitive i with seed ``seed + i``."""
    return [sample_primitive(bp, n, seed + i) for i, bp in enumerate(primitives)]


def eval_match(pred: Sequence[BoundedPrimitive], gt: Sequence[BoundedPrimitive],
               cfg: Optional[EvalConfig] = None, pred_samples: Optional[List[np.ndarray]] = None,
               gt_samples: Optional[List[np.ndarray]] = None) -> MatchResult:
    """
    Hungarian matching of predicted to ground-truth primitives by Chamfer distance
    between their surface samples.

    Args:
        pred (Sequence[BoundedPrimitive]): Predicted primitives (rows).
        gt (Sequence[BoundedPrimitive]): Ground-truth primitives (columns).
        cfg (Optional[EvalConfig]): Sample count and seed.
        pred_samples, gt_samples: Samples already drawn with ``cfg``.

    Returns:
        MatchResult: Pairs (pred index, gt index) sorted by pred index.
    """
    cfg = cfg or EvalConfig()
    if not pred or not gt:
        return MatchResult(pairs=[], total=0.0, unmatched=list(range(len(pred))))
    pred_samples = pred_samples or sample_primitives(pred, cfg.samples, cfg.seed)
    gt_samples = gt_samples or sample_primitives(gt, cfg.samples, cfg.seed)
    cost = np.array([[chamfer(a, b) for b in gt_samples] for a in pred_samples])
    return hungarian(cost)


def axis_error(match: MatchResult, pred: Sequence[BoundedPrimitive], gt: Sequence[BoundedPrimitive]) -> float:
    """
    Mean angle in degrees between axes of type-correct axis-bearing pairs.

    Raises:
        NoAxisPairs: No pair qualifies.
    """
    angles = []
    for i, j in match.pairs:
        p, g = pred[i].quadric, gt[j].quadric
        if p.type_tag is not g.type_tag or g.type_tag not in _AXIS_TYPES:
            continue
        dot = abs(float(axis_of(p) @ axis_of(g)))
        angles.append(np.degrees(np.arccos(min(dot, 1.0))))
    if not angles:
        raise NoAxisPairs("no type-correct pair with an axis")
    return float(np.mean(angles))


def primitive_quality(match: MatchResult, pred: Sequence[BoundedPrimitive], gt: Sequence[BoundedPrimitive],
                      cfg: Optional[EvalConfig] = None, pred_samples: Optional[List[np.ndarray]] = None,
                      gt_samples: Optional[List[np.ndarray]] = None) -> PrimitiveQuality:
    """
    F1, Type, Axis, Res and Cov over the matched pairs.

    Res and Cov measure ground-truth samples against the predicted surface.

    Raises:
        EmptySet: The matching has no pair.
    """
    if not match.pairs:
        raise EmptySet("matching has no pair")
    cfg = cfg or EvalConfig()
    pred_samples = pred_samples or sample_primitives(pred, cfg.samples, cfg.seed)
    gt_samples = gt_samples or sample_primitives(gt, cfg.samples, cfg.seed)

    f1s, correct, residuals, covered = [], [], [], []
    for i, j in match.pairs:
        f1s.append(fscore(pred_samples[i], gt_samples[j], cfg.tau))
        correct.append(pred[i].type_tag is gt[j].type_tag)
        d = distances(pred[i].quadric, gt_samples[j])
        residuals.append(float(d.mean()))
        covered.append(float(np.mean(d < cfg.epsilon)))
    try:
        axis = axis_error(match, pred, gt)
    except NoAxisPairs:
        axis = None
    return PrimitiveQuality(f1=float(np.mean(f1s)), type_acc=SCALE * float(np.mean(correct)), axis_deg=axis,
                            res=SCALE * float(np.mean(residuals)), cov=SCALE * float(np.mean(covered)),
                            matched=len(match.pairs))
