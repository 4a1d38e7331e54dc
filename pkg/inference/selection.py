"""
Module: selection
Scoring, selection and projection refinement of candidate primitives.
"""
import warnings
from typing import Iterable, Optional

import numpy as np

from geometry.errors import GeometryError, RankDeficient
from geometry.fitting import fit_quadric
from geometry.quadric import snap_to_type
from geometry.sampling import project_points
from geometry.schemas import PrimitiveType, Quadric
from inference.schemas import Candidate, CandidateSet, PrimitiveSource
from logs.project_log import main_logger
from network.model import inlier_sets
from network.schemas import ForwardOutput

__all__ = ('predicted_type', 'score', 'dense_points', 'candidate_quadric', 'build_candidates', 'select',
           'refine_project')


def predicted_type(probs) -> PrimitiveType:
    """Arg max over the non-null classes; the first class wins ties."""
    probs = np.asarray(probs, dtype=np.float64)
    return PrimitiveType.from_index(int(np.argmax(probs[:-1])), len(probs))


def score(probs, membership_row, inliers: Iterable[int]) -> float:
    """
    Confidence π[ĉ] · mean membership over the inlier patches.

    Args:
        probs: Type distribution, null class last.
        membership_row: Memberships over the U patches.
        inliers (Iterable[int]): Inlier patch indices.

    Returns:
        float: The score, 0 for an empty inlier set.
    """
    inliers = sorted(inliers)
    if not inliers:
        return 0.0
    probs = np.asarray(probs, dtype=np.float64)
    row = np.asarray(membership_row, dtype=np.float64)
    value = float(probs[predicted_type(probs).class_index(len(probs))] * row[inliers].mean())
    return min(max(value, 0.0), 1.0)


def dense_points(patches: np.ndarray, inliers: Iterable[int]) -> np.ndarray:
    """Union of the inlier patches in ascending patch order."""
    inliers = sorted(inliers)
    if not inliers:
        return np.zeros((0, 3))
    return np.asarray(patches, dtype=np.float64)[inliers].reshape(-1, 3)


def _analytic(coeffs: np.ndarray, type_tag: PrimitiveType) -> Optional[Quadric]:
    try:
        return snap_to_type(coeffs, type_tag)
    except GeometryError as exc:
        main_logger.debug("head quadric cannot be snapped to %s: %s", type_tag.value, exc)
        return None


def _fitted(points: np.ndarray, type_tag: PrimitiveType) -> Optional[Quadric]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RankDeficient)
        try:
            return fit_quadric(points, constrain=type_tag)
        except (GeometryError, np.linalg.LinAlgError) as exc:
            main_logger.debug("no %s fits %d inlier points: %s", type_tag.value, len(points), exc)
            return None


def candidate_quadric(coeffs, points: np.ndarray, type_tag: PrimitiveType,
                      source: PrimitiveSource = PrimitiveSource.ANALYTIC) -> Optional[Quadric]:
    """
    Type-consistent quadric for a candidate.

    The preferred source is tried first and the other one is the fallback.
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    attempts = [lambda: _analytic(coeffs, type_tag), lambda: _fitted(points, type_tag)]
    if source is PrimitiveSource.FITTED:
        attempts.reverse()
    for attempt in attempts:
        quadric = attempt()
        if quadric is not None:
            return quadric
    return None


def build_candidates(output: ForwardOutput, source: PrimitiveSource = PrimitiveSource.ANALYTIC) -> CandidateSet:
    """
    Decodes and scores all K candidates of one forward pass.

    Args:
        output (ForwardOutput): Network outputs.
        source (PrimitiveSource): Quadric source.

    Returns:
        CandidateSet: One candidate per proxy, in proxy order.
    """
    candidates = []
    for k in range(output.probs.shape[0]):
        probs, row = output.probs[k], output.membership[k]
        inliers = inlier_sets(row)
        type_tag = predicted_type(probs)
        points = dense_points(output.patches, inliers)
        candidates.append(Candidate(
            index=k, probs=probs, type_tag=type_tag, membership=row, inliers=inliers, coeffs=output.coeffs[k],
            quadric=candidate_quadric(output.coeffs[k], points, type_tag, source) if inliers else None,
            score=score(probs, row, inliers), points=points,
        ))
    return CandidateSet(candidates=candidates)


def select(candidates: CandidateSet, threshold: float = 0.5) -> CandidateSet:
    """
    Keeps candidates with score ≥ ``threshold`` and at least one inlier, in order.

    Raises:
        ValueError: ``threshold`` outside [0, 1].
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    kept = [c for c in candidates if c.inliers and c.score >= threshold]
    main_logger.debug("selected %d of %d candidates at threshold %.2f", len(kept), len(candidates), threshold)
    return CandidateSet(candidates=kept)


def refine_project(candidate: Candidate) -> Candidate:
    """
    Moves the candidate's dense points onto its quadric.

    Points whose projection fails keep their position; membership, type and
    score are untouched.
    """
    if candidate.quadric is None or not len(candidate.points):
        return candidate
    refined, failed = project_points(candidate.points, candidate.quadric)
    if failed.any():
        main_logger.debug("projection kept %d original points of candidate %d", int(failed.sum()), candidate.index)
    return candidate.model_copy(update={"points": refined, "projected": True})
