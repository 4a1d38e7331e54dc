"""
Module: geometric
Point-set metrics: Chamfer (L1 convention), Hausdorff, normal consistency and F-score.
"""
import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import directed_hausdorff

from assignment.losses import chamfer as _chamfer
from metrics.errors import EmptySet, NonUnitNormal

__all__ = ('chamfer', 'hausdorff', 'normal_consistency', 'fscore', 'UNIT_TOL')

UNIT_TOL = 1e-6


def _points(points, name: str) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        raise EmptySet(f"{name} is empty")
    return pts


def chamfer(a, b) -> float:
    """
    ½·(mean_a min_b ‖a−b‖ + mean_b min_a ‖a−b‖).

    Raises:
        EmptySet: Either set is empty.
    """
    return _chamfer(_points(a, "A"), _points(b, "B"))


def hausdorff(a, b) -> float:
    """Symmetric Hausdorff distance."""
    a, b = _points(a, "A"), _points(b, "B")
    return max(directed_hausdorff(a, b)[0], directed_hausdorff(b, a)[0])


def _unit(normals, count: int, name: str) -> np.ndarray:
    n = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
    if len(n) != count:
        raise ValueError(f"{name}: {len(n)} normals for {count} points")
    if np.any(np.abs(np.linalg.norm(n, axis=1) - 1.0) > UNIT_TOL):
        raise NonUnitNormal(f"{name} holds normals that are not unit length")
    return n


def normal_consistency(pred_points, pred_normals, gt_points, gt_normals) -> float:
    """
    Symmetric mean of |⟨n_a, n_nn(a)⟩| over nearest-neighbour pairs.

    Args:
        pred_points: Predicted points.
        pred_normals: Unit normals at ``pred_points``.
        gt_points: Ground-truth points.
        gt_normals: Unit normals at ``gt_points``.

    Returns:
        float: Value in [0, 1].

    Raises:
        EmptySet: Either set is empty.
        NonUnitNormal: A normal is not unit length within 1e-6.
    """
    a, b = _points(pred_points, "prediction"), _points(gt_points, "ground truth")
    na, nb = _unit(pred_normals, len(a), "prediction"), _unit(gt_normals, len(b), "ground truth")
    _, to_b = cKDTree(b).query(a, k=1)
    _, to_a = cKDTree(a).query(b, k=1)
    forward = np.abs(np.sum(na * nb[to_b], axis=1)).mean()
    backward = np.abs(np.sum(nb * na[to_a], axis=1)).mean()
    return float(0.5 * (forward + backward))


def fscore(a, b, tau: float = 0.01) -> float:
    """
    Harmonic mean of precision (share of ``a`` within ``tau`` of ``b``) and recall.

    Returns:
        float: 0 when neither side has a point within ``tau``.
    """
    a, b = _points(a, "A"), _points(b, "B")
    to_b, _ = cKDTree(b).query(a, k=1)
    to_a, _ = cKDTree(a).query(b, k=1)
    precision = float(np.mean(to_b <= tau))
    recall = float(np.mean(to_a <= tau))
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)
