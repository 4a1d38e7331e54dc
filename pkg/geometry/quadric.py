"""
Module: quadric
Homogeneous quadric algebra: canonical normalization, evaluation, distance,
type classification, axis extraction, analytic constructors, similarity
transforms and snapping to an ideal primitive type.
"""
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from geometry.errors import AllZero, DegenerateGradient, InvalidPrimitive, NoAxis
from geometry.schemas import PrimitiveType, Quadric, QUADRATIC_INDICES, LINEAR_INDICES

__all__ = ('FROBENIUS_WEIGHTS', 'canonicalize', 'coeffs_to_matrix', 'matrix_to_coeffs',
           'quadric_from_coeffs', 'quadric_from_matrix', 'quadric_matrix', 'evaluate', 'gradient',
           'distance', 'distances', 'surface_normals', 'classify', 'axis_of', 'make_plane',
           'make_sphere', 'make_cylinder', 'make_cone', 'transform_quadric', 'snap_to_type',
           'plane_parameters', 'sphere_parameters', 'cylinder_parameters', 'cone_parameters')

# ‖A‖_F² = Σ w_i c_i² over the ten unique entries (off-diagonals appear twice)
FROBENIUS_WEIGHTS = np.array([1, 1, 1, 1, 2, 2, 2, 2, 2, 2], dtype=np.float64)

ZERO_COEFF = 1e-12
TAU_EIG = 1e-5
EQUAL_TOL = 1e-3
GRADIENT_FLOOR = 1e-9

_ROWS = (0, 1, 2, 3, 0, 0, 0, 1, 1, 2)
_COLS = (0, 1, 2, 3, 1, 2, 3, 2, 3, 3)

PointLike = Union[Sequence[float], np.ndarray]


def coeffs_to_matrix(coeffs: PointLike) -> np.ndarray:
    """Builds the symmetric 4x4 matrix from the ten unique coefficients."""
    c = np.asarray(coeffs, dtype=np.float64)
    matrix = np.zeros((4, 4))
    matrix[_ROWS, _COLS] = c
    matrix[_COLS, _ROWS] = c
    return matrix


def matrix_to_coeffs(matrix: np.ndarray) -> np.ndarray:
    sym = 0.5 * (np.asarray(matrix, dtype=np.float64) + np.asarray(matrix, dtype=np.float64).T)
    return sym[_ROWS, _COLS].copy()


def canonicalize(coeffs: PointLike) -> np.ndarray:
    """
    Scales coefficients to ‖A‖_F = 1 with the first nonzero entry positive.

    Raises:
        AllZero: Every coefficient is below 1e-12 in magnitude.
    """
    c = np.asarray(coeffs, dtype=np.float64).reshape(10)
    nonzero = np.flatnonzero(np.abs(c) >= ZERO_COEFF)
    if nonzero.size == 0:
        raise AllZero("all quadric coefficients are zero")
    c = c / np.sqrt(np.sum(FROBENIUS_WEIGHTS * c * c))
    # leading sign is judged after scaling so that tiny leading entries do not flip it
    lead = np.flatnonzero(np.abs(c) >= ZERO_COEFF)[0]
    if c[lead] < 0:
        c = -c
    c[np.abs(c) < ZERO_COEFF * 1e-3] = 0.0
    return c


def quadric_from_coeffs(coeffs: PointLike, type_tag: Optional[PrimitiveType] = None) -> Quadric:
    """
    Creates the canonically normalized quadric.

    Args:
        coeffs: Ten coefficients in a11,a22,a33,a44,a12,a13,a14,a23,a24,a34 order.
        type_tag: Known primitive type; classified from the coefficients when omitted.

    Raises:
        AllZero: All coefficients vanish.
        InvalidPrimitive: ``type_tag`` is Plane but the quadratic block is nonzero.
    """
    c = canonicalize(coeffs)
    if type_tag is None:
        type_tag = classify(c)
    if type_tag is PrimitiveType.PLANE:
        if np.any(np.abs(c[list(QUADRATIC_INDICES)]) > 1e-9):
            raise InvalidPrimitive("plane quadric must have a zero quadratic block")
        c[list(QUADRATIC_INDICES)] = 0.0
    return Quadric(coeffs=tuple(float(v) for v in c), type_tag=type_tag)


def quadric_from_matrix(matrix: np.ndarray, type_tag: Optional[PrimitiveType] = None) -> Quadric:
    return quadric_from_coeffs(matrix_to_coeffs(matrix), type_tag)


def quadric_matrix(q: Quadric) -> np.ndarray:
    return coeffs_to_matrix(q.coeffs)


def _split(q: Union[Quadric, np.ndarray]) -> Tuple[np.ndarray, np.ndarray, float]:
    matrix = coeffs_to_matrix(q.coeffs if isinstance(q, Quadric) else q)
    return matrix[:3, :3], matrix[:3, 3], matrix[3, 3]


def evaluate(q: Quadric, p: PointLike) -> Union[float, np.ndarray]:
    """Returns xᵀAx for x = (p, 1); accepts one point or an N x 3 array."""
    a33, b, a44 = _split(q)
    pts = np.asarray(p, dtype=np.float64)
    single = pts.ndim == 1
    pts = pts.reshape(-1, 3)
    values = np.einsum("ni,ij,nj->n", pts, a33, pts) + 2.0 * pts @ b + a44
    return float(values[0]) if single else values


def gradient(q: Quadric, p: PointLike) -> np.ndarray:
    """Spatial gradient ∇ₚ(xᵀAx) = 2(A₃₃p + b)."""
    a33, b, _ = _split(q)
    pts = np.asarray(p, dtype=np.float64)
    return 2.0 * (pts @ a33 + b)


def plane_parameters(q: Quadric) -> Tuple[np.ndarray, float]:
    """Unit normal n and offset d with n·p + d = 0."""
    _, b, a44 = _split(q)
    norm = np.linalg.norm(b)
    if norm < GRADIENT_FLOOR:
        raise InvalidPrimitive("plane has no linear part")
    return b / norm, a44 / (2.0 * norm)


def sphere_parameters(q: Quadric) -> Tuple[np.ndarray, float]:
    a33, b, a44 = _split(q)
    a = np.trace(a33) / 3.0
    center = -b / a
    r2 = center @ center - a44 / a
    if r2 <= 0:
        raise InvalidPrimitive("sphere has no real points")
    return center, float(np.sqrt(r2))


def _eigen(a33: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    values, vectors = linalg.eigh(a33)
    return values, vectors


def _canonical_direction(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    for i in (2, 1, 0):
        if abs(v[i]) > 1e-12:
            return v if v[i] > 0 else -v
    return v


def cylinder_parameters(q: Quadric) -> Tuple[np.ndarray, np.ndarray, float]:
    """Axis point (closest to the origin), unit axis and radius."""
    a33, b, a44 = _split(q)
    values, vectors = _eigen(a33)
    axial = int(np.argmin(np.abs(values)))
    axis = _canonical_direction(vectors[:, axial])
    alpha = float(np.mean(np.delete(values, axial)))
    point = -linalg.pinv(a33, rtol=1e-8) @ b
    point = point - (point @ axis) * axis
    k = b @ point + a44
    r2 = -k / alpha
    if r2 <= 0:
        raise InvalidPrimitive("cylinder has no real points")
    return point, axis, float(np.sqrt(r2))


def cone_parameters(q: Quadric) -> Tuple[np.ndarray, np.ndarray, float]:
    """Apex, unit axis and half-angle in radians."""
    a33, b, _ = _split(q)
    values, vectors = _eigen(a33)
    signs = np.sign(values)
    odd = int(np.flatnonzero(signs != np.sign(np.sum(signs)))[0])
    axis = _canonical_direction(vectors[:, odd])
    mu = float(np.mean(np.delete(values, odd)))
    apex = -np.linalg.solve(a33, b)
    # A₃₃ ∝ ddᵀ − cos²φ·I  ⇒  λ_axis / λ_perp = −tan²φ
    tan2 = -values[odd] / mu
    return apex, axis, float(np.arctan(np.sqrt(max(tan2, 0.0))))


def distance(q: Quadric, p: PointLike, exact: bool = True) -> float:
    """
    Point-to-surface distance.

    Planes and spheres use the exact geometric distance; other types use the
    first-order (Sampson) approximation |f| / ‖∇f‖.

    Raises:
        DegenerateGradient: ‖∇f‖ < 1e-9; ``fallback`` holds sqrt(|f|).
    """
    p = np.asarray(p, dtype=np.float64).reshape(3)
    if exact and q.type_tag is PrimitiveType.SPHERE:
        center, radius = sphere_parameters(q)
        return float(abs(np.linalg.norm(p - center) - radius))
    f = evaluate(q, p)
    grad = gradient(q, p)
    norm = float(np.linalg.norm(grad))
    if norm < GRADIENT_FLOOR:
        raise DegenerateGradient(float(np.sqrt(abs(f))))
    # for planes f is affine, so the first-order value is already exact
    return abs(f) / norm


def distances(q: Quadric, points: np.ndarray, exact: bool = True) -> np.ndarray:
    """Vectorized ``distance``; degenerate points take the sqrt(|f|) fallback."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if exact and q.type_tag is PrimitiveType.SPHERE:
        center, radius = sphere_parameters(q)
        return np.abs(np.linalg.norm(pts - center, axis=1) - radius)
    f = evaluate(q, pts)
    norm = np.linalg.norm(gradient(q, pts), axis=1)
    degenerate = norm < GRADIENT_FLOOR
    out = np.empty(len(pts))
    out[~degenerate] = np.abs(f[~degenerate]) / norm[~degenerate]
    out[degenerate] = np.sqrt(np.abs(f[degenerate]))
    return out


def surface_normals(q: Quadric, points: np.ndarray) -> np.ndarray:
    """Unit gradients at ``points``; rows with a vanishing gradient are zero."""
    grad = gradient(q, np.asarray(points, dtype=np.float64).reshape(-1, 3))
    norm = np.linalg.norm(grad, axis=1, keepdims=True)
    return np.divide(grad, norm, out=np.zeros_like(grad), where=norm >= GRADIENT_FLOOR)


def _equal(x: float, y: float, scale: float, tol: float) -> bool:
    return abs(x - y) <= tol * scale


def classify(q: Union[Quadric, np.ndarray], tau_eig: float = TAU_EIG,
             equal_tol: float = EQUAL_TOL) -> PrimitiveType:
    """
    Recovers the primitive type from the eigenvalue signature of A₃₃.

    Args:
        q: Quadric or canonical coefficient vector.
        tau_eig: Relative threshold under which an eigenvalue counts as zero.
        equal_tol: Relative tolerance under which two eigenvalues count as equal.
    """
    a33, b, a44 = _split(q)
    values = linalg.eigvalsh(a33)
    scale = float(np.max(np.abs(values)))
    if scale < 1e-9:
        return PrimitiveType.PLANE if np.linalg.norm(b) > 1e-9 else PrimitiveType.NULL
    zero = np.abs(values) < tau_eig * scale
    live = values[~zero]
    if zero.sum() == 1:
        if live[0] * live[1] <= 0 or not _equal(live[0], live[1], scale, equal_tol):
            return PrimitiveType.NULL
        center = -linalg.pinv(a33, rtol=tau_eig) @ b
        if np.linalg.norm(a33 @ center + b) > 1e-6 * max(1.0, np.linalg.norm(b)):
            return PrimitiveType.NULL  # parabolic cylinder
        k = b @ center + a44
        return PrimitiveType.CYLINDER if k * live[0] < 0 else PrimitiveType.NULL
    if zero.sum() != 0:
        return PrimitiveType.NULL
    center = -np.linalg.solve(a33, b)
    k = b @ center + a44
    positive = int(np.sum(values > 0))
    if positive in (0, 3):
        if _equal(values[0], values[2], scale, equal_tol) and k * values[0] < 0:
            return PrimitiveType.SPHERE
        return PrimitiveType.NULL
    pair = values[values > 0] if positive == 2 else values[values < 0]
    if abs(k) < tau_eig * scale and _equal(pair[0], pair[1], scale, equal_tol):
        return PrimitiveType.CONE
    return PrimitiveType.NULL


def axis_of(q: Quadric) -> np.ndarray:
    """
    Plane normal or symmetry axis, sign-canonicalized (positive z, then y, then x).

    Raises:
        NoAxis: Spheres and null quadrics.
    """
    if q.type_tag is PrimitiveType.PLANE:
        return _canonical_direction(plane_parameters(q)[0])
    if q.type_tag is PrimitiveType.CYLINDER:
        return cylinder_parameters(q)[1]
    if q.type_tag is PrimitiveType.CONE:
        return cone_parameters(q)[1]
    raise NoAxis(f"{q.type_tag.value} has no axis")


def make_plane(normal: PointLike, offset: float) -> Quadric:
    """Plane n·p + offset = 0."""
    n = np.asarray(normal, dtype=np.float64)
    c = np.zeros(10)
    c[list(LINEAR_INDICES)] = n / 2.0
    c[3] = offset
    return quadric_from_coeffs(c, PrimitiveType.PLANE)


def _from_blocks(a33: np.ndarray, b: np.ndarray, a44: float, type_tag: PrimitiveType) -> Quadric:
    matrix = np.zeros((4, 4))
    matrix[:3, :3] = a33
    matrix[:3, 3] = b
    matrix[3, :3] = b
    matrix[3, 3] = a44
    return quadric_from_matrix(matrix, type_tag)


def _centered(a33: np.ndarray, center: np.ndarray, k: float, type_tag: PrimitiveType) -> Quadric:
    """Quadric (p−c)ᵀA₃₃(p−c) + k."""
    return _from_blocks(a33, -a33 @ center, float(center @ a33 @ center + k), type_tag)


def make_sphere(center: PointLike, radius: float) -> Quadric:
    return _centered(np.eye(3), np.asarray(center, dtype=np.float64), -radius ** 2, PrimitiveType.SPHERE)


def make_cylinder(point: PointLike, axis: PointLike, radius: float) -> Quadric:
    d = np.asarray(axis, dtype=np.float64)
    d = d / np.linalg.norm(d)
    return _centered(np.eye(3) - np.outer(d, d), np.asarray(point, dtype=np.float64),
                     -radius ** 2, PrimitiveType.CYLINDER)


def make_cone(apex: PointLike, axis: PointLike, half_angle: float) -> Quadric:
    d = np.asarray(axis, dtype=np.float64)
    d = d / np.linalg.norm(d)
    a33 = np.outer(d, d) - np.cos(half_angle) ** 2 * np.eye(3)
    return _centered(a33, np.asarray(apex, dtype=np.float64), 0.0, PrimitiveType.CONE)


def transform_quadric(q: Quadric, transform: np.ndarray) -> Quadric:
    """
    Maps the surface through the 4x4 point transform p' = H p.

    A' = H⁻ᵀ A H⁻¹; the type tag is kept (similarities preserve type).
    """
    inv = np.linalg.inv(np.asarray(transform, dtype=np.float64))
    return quadric_from_matrix(inv.T @ quadric_matrix(q) @ inv, q.type_tag)


def snap_to_type(q: Union[Quadric, np.ndarray], type_tag: PrimitiveType) -> Quadric:
    """
    Nearest ideal quadric of ``type_tag`` sharing the centre/axis of ``q``.

    Raises:
        InvalidPrimitive: The eigen-structure of ``q`` cannot carry the type.
    """
    c = canonicalize(q.coeffs if isinstance(q, Quadric) else q)
    a33, b, a44 = _split(c)
    if type_tag is PrimitiveType.PLANE:
        if np.linalg.norm(b) < GRADIENT_FLOOR:
            raise InvalidPrimitive("cannot snap to a plane: linear part vanishes")
        c[list(QUADRATIC_INDICES)] = 0.0
        return quadric_from_coeffs(c, PrimitiveType.PLANE)
    if type_tag is PrimitiveType.NULL:
        raise InvalidPrimitive("null is not a geometric type")
    values, vectors = _eigen(a33)
    scale = float(np.max(np.abs(values)))
    if scale < GRADIENT_FLOOR:
        raise InvalidPrimitive("quadratic block vanishes")

    def f(p: np.ndarray) -> float:
        return float(p @ a33 @ p + 2.0 * b @ p + a44)

    if type_tag is PrimitiveType.SPHERE:
        if not (np.all(values > 0) or np.all(values < 0)):
            raise InvalidPrimitive("eigenvalues of mixed sign cannot form a sphere")
        lam = float(np.mean(values))
        center = -np.linalg.solve(a33, b)
        k = f(center)
        if k * lam >= 0:
            raise InvalidPrimitive("snapped sphere has no real points")
        return _centered(lam * np.eye(3), center, k, PrimitiveType.SPHERE)
    if type_tag is PrimitiveType.CYLINDER:
        axial = int(np.argmin(np.abs(values)))
        rest = np.delete(values, axial)
        if rest[0] * rest[1] <= 0:
            raise InvalidPrimitive("radial eigenvalues must share a sign")
        d = vectors[:, axial]
        alpha = float(np.mean(rest))
        projector = np.eye(3) - np.outer(d, d)
        # axis point from the radial part only
        radial = vectors[:, [i for i in range(3) if i != axial]]
        point = -radial @ ((radial.T @ b) / rest)
        k = f(point)
        if k * alpha >= 0:
            raise InvalidPrimitive("snapped cylinder has no real points")
        return _centered(alpha * projector, point, k, PrimitiveType.CYLINDER)
    # cone
    if np.min(np.abs(values)) < TAU_EIG * scale:
        raise InvalidPrimitive("a cone needs a nonsingular quadratic block")
    signs = np.sign(values)
    if abs(np.sum(signs)) != 1:
        raise InvalidPrimitive("a cone needs a 2+1 eigenvalue signature")
    odd = int(np.flatnonzero(signs != np.sign(np.sum(signs)))[0])
    d = vectors[:, odd]
    mu = float(np.mean(np.delete(values, odd)))
    apex = -np.linalg.solve(a33, b)
    a33_cone = mu * (np.eye(3) - np.outer(d, d)) + values[odd] * np.outer(d, d)
    return _centered(a33_cone, apex, 0.0, PrimitiveType.CONE)
