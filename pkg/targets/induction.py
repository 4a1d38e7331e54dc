"""
Module: induction
Transfers ground-truth primitive labels to predicted points, votes per patch
and collects the patches of each primitive. Recomputed for every prediction.
"""
from typing import Dict, FrozenSet

import numpy as np
from scipy.spatial import cKDTree

from scene.schemas import LabeledCloud
from targets.schemas import PatchedPrediction, TargetAssignment

__all__ = ('nearest_indices', 'assign_point_labels', 'patch_majority', 'build_target_sets', 'induce_targets')

# slack on the nearest distance when collecting equidistant candidates
_TIE_SLACK = 1e-12


def nearest_indices(reference: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """
    Exact nearest reference index per query; equidistant references resolve to
    the smallest index.
    """
    reference = np.asarray(reference, dtype=np.float64).reshape(-1, 3)
    queries = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
    tree = cKDTree(reference)
    dist, idx = tree.query(queries, k=1)
    # the tree returns an arbitrary member of a tie; re-scan the ball around each query
    candidates = tree.query_ball_point(queries, r=dist * (1 + 1e-9) + _TIE_SLACK)
    for i, near in enumerate(candidates):
        if len(near) < 2:
            continue
        near = np.asarray(near)
        d = np.linalg.norm(reference[near] - queries[i], axis=1)
        best = near[d == d.min()]
        idx[i] = int(best.min())
    return np.asarray(idx, dtype=np.int64)


def assign_point_labels(pred: PatchedPrediction, gt: LabeledCloud) -> np.ndarray:
    """
    Labels every predicted point with its nearest ground-truth point's primitive id.

    Returns:
        np.ndarray: U x J primitive ids.
    """
    idx = nearest_indices(gt.points, pred.flat)
    return gt.labels[idx].reshape(pred.patch_count, pred.patch_size)


def patch_majority(point_labels) -> int:
    """Most frequent label of one patch; ties go to the smallest id."""
    values, counts = np.unique(np.asarray(point_labels, dtype=np.int64), return_counts=True)
    # np.unique sorts values, argmax picks the first maximum
    return int(values[int(np.argmax(counts))])


def build_target_sets(patch_labels, primitive_count: int) -> Dict[int, FrozenSet[int]]:
    """
    Groups 0-based patch indices by voted primitive id.

    Every id in 1..primitive_count is present; primitives without patches map to
    an empty set and stay in the matching pool.
    """
    labels = np.asarray(patch_labels, dtype=np.int64)
    if np.any(labels < 1) or np.any(labels > primitive_count):
        raise ValueError(f"patch labels must lie in 1..{primitive_count}")
    return {g: frozenset(int(u) for u in np.flatnonzero(labels == g)) for g in range(1, primitive_count + 1)}


def induce_targets(pred: PatchedPrediction, gt: LabeledCloud) -> TargetAssignment:
    """Runs label transfer, patch voting and set construction for one prediction."""
    point_labels = assign_point_labels(pred, gt)
    patch_labels = np.array([patch_majority(row) for row in point_labels], dtype=np.int64)
    return TargetAssignment(
        point_labels=point_labels,
        patch_labels=patch_labels,
        target_sets=build_target_sets(patch_labels, gt.primitive_count),
    )
