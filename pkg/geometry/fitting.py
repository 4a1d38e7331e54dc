"""
Module: fitting
Algebraic least-squares quadric fitting under the Frobenius-norm constraint.
"""
import warnings
from typing import Optional, Tuple

import numpy as np
from scipy import linalg

from geometry.errors import Underdetermined, RankDeficient
from geometry.quadric import FROBENIUS_WEIGHTS, quadric_from_coeffs, snap_to_type, transform_quadric
from geometry.schemas import PrimitiveType, Quadric
from logs.project_log import main_logger

__all__ = ('design_matrix', 'fit_quadric', 'fit_residual')

# coefficient subspaces (indices into the ten-vector) spanned by constrained fits
_PLANE_INDICES = (3, 6, 8, 9)
NULL_SPACE_TOL = 1e-10


def design_matrix(points: np.ndarray) -> np.ndarray:
    """Rows [x², y², z², 1, 2xy, 2xz, 2x, 2yz, 2y, 2z] so that row·c = xᵀAx."""
    x, y, z = np.asarray(points, dtype=np.float64).reshape(-1, 3).T
    one = np.ones_like(x)
    return np.stack([x * x, y * y, z * z, one, 2 * x * y, 2 * x * z, 2 * x, 2 * y * z, 2 * y, 2 * z], axis=1)


def fit_residual(q: Quadric, points: np.ndarray) -> float:
    """Σᵢ (xᵢᵀAxᵢ)² for the canonical coefficients of ``q``."""
    return float(np.sum((design_matrix(points) @ q.vector) ** 2))


def _conditioning(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Similarity moving the points to zero mean and unit RMS radius."""
    center = points.mean(axis=0)
    scale = np.sqrt(np.mean(np.sum((points - center) ** 2, axis=1)))
    scale = 1.0 / scale if scale > 1e-12 else 1.0
    transform = np.eye(4)
    transform[:3, :3] *= scale
    transform[:3, 3] = -scale * center
    return (points - center) * scale, transform


def _smallest_eigvec(scatter: np.ndarray, weights: np.ndarray) -> Tuple[np.ndarray, bool]:
    """
    Minimizes cᵀSc subject to cᵀWc = 1 (W diagonal).

    Returns the minimizer and whether the null space is degenerate.
    """
    w_inv_sqrt = 1.0 / np.sqrt(weights)
    reduced = scatter * np.outer(w_inv_sqrt, w_inv_sqrt)
    values, vectors = linalg.eigh(reduced)
    scale = max(float(values[-1]), 1e-300)
    degenerate = len(values) > 1 and values[1] <= NULL_SPACE_TOL * scale
    return vectors[:, 0] * w_inv_sqrt, degenerate


def fit_quadric(points: np.ndarray, constrain: Optional[PrimitiveType] = None) -> Quadric:
    """
    Fits xᵀAx = 0 to ``points`` minimizing Σ(xᵢᵀAxᵢ)² with ‖A‖_F = 1.

    Args:
        points (np.ndarray): N x 3 points.
        constrain (Optional[PrimitiveType]): Plane and Sphere restrict the fit to
            their coefficient subspaces; Cylinder and Cone fit unconstrained and
            then snap to the nearest ideal primitive of that type.

    Returns:
        Quadric: The canonically normalized fit.

    Raises:
        Underdetermined: Fewer points than the fit needs.

    Warns:
        RankDeficient: The minimizer is not unique.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    needed = {PrimitiveType.PLANE: 3, PrimitiveType.SPHERE: 4}.get(constrain, 9)
    if len(pts) < needed:
        raise Underdetermined(f"{len(pts)} points given, {needed} needed")

    local, transform = _conditioning(pts)
    rows = design_matrix(local)
    if constrain is PrimitiveType.PLANE:
        sub = rows[:, list(_PLANE_INDICES)]
        coeffs_sub, degenerate = _smallest_eigvec(sub.T @ sub, FROBENIUS_WEIGHTS[list(_PLANE_INDICES)])
        coeffs = np.zeros(10)
        coeffs[list(_PLANE_INDICES)] = coeffs_sub
    elif constrain is PrimitiveType.SPHERE:
        # (a, a44, a14, a24, a34) with a11 = a22 = a33 = a and no cross terms
        sub = np.stack([rows[:, 0] + rows[:, 1] + rows[:, 2], rows[:, 3], rows[:, 6], rows[:, 8], rows[:, 9]], axis=1)
        coeffs_sub, degenerate = _smallest_eigvec(sub.T @ sub, np.array([3.0, 1.0, 2.0, 2.0, 2.0]))
        a, a44, a14, a24, a34 = coeffs_sub
        coeffs = np.array([a, a, a, a44, 0.0, 0.0, a14, 0.0, a24, a34])
    else:
        coeffs, degenerate = _smallest_eigvec(rows.T @ rows, FROBENIUS_WEIGHTS)

    if degenerate:
        main_logger.debug("rank-deficient quadric fit on %d points", len(pts))
        warnings.warn(RankDeficient("fit null space has dimension > 1"), stacklevel=2)

    tag = constrain if constrain in (PrimitiveType.PLANE, PrimitiveType.SPHERE) else None
    local_fit = quadric_from_coeffs(coeffs, tag)
    # local = T·p, so the world surface is the local one pulled back through T⁻¹
    fit = transform_quadric(local_fit, np.linalg.inv(transform))
    if constrain in (PrimitiveType.CYLINDER, PrimitiveType.CONE):
        fit = snap_to_type(fit, constrain)
    return fit
