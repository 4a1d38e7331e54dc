"""
Module: sampling
Uniform sampling of bounded primitives and foot-point projection onto quadrics.
"""
import itertools

import numpy as np

from geometry.errors import EmptyIntersection, GeometryError, NoConvergence
from geometry.quadric import (cone_parameters, cylinder_parameters, evaluate, gradient, plane_parameters,
                              quadric_matrix, sphere_parameters)
from geometry.schemas import BoundedPrimitive, PrimitiveType, Quadric

__all__ = ('sample_surface', 'project', 'project_points')

EXTENT_TOL = 1e-9
APEX_EXCLUSION = 1e-6
NEWTON_STEPS = 10
SURFACE_TOL = 1e-8
_BATCH = 1024


def _orthonormal_basis(normal: np.ndarray):
    helper = np.eye(3)[int(np.argmin(np.abs(normal)))]
    u = np.cross(normal, helper)
    u /= np.linalg.norm(u)
    return u, np.cross(normal, u)


def _corners(extent: np.ndarray) -> np.ndarray:
    return np.array([[extent[i][0], extent[j][1], extent[k][2]]
                     for i, j, k in itertools.product((0, 1), repeat=3)])


def _draw(bp: BoundedPrimitive, rng: np.random.Generator, count: int) -> np.ndarray:
    """Draws ``count`` area-uniform points from the surface patch spanning the extent's corners."""
    q, corners = bp.quadric, _corners(bp.extent)
    if q.type_tag is PrimitiveType.PLANE:
        normal, offset = plane_parameters(q)
        origin = -offset * normal
        u, v = _orthonormal_basis(normal)
        cu, cv = (corners - origin) @ u, (corners - origin) @ v
        su = rng.uniform(cu.min(), cu.max(), count)
        sv = rng.uniform(cv.min(), cv.max(), count)
        return origin + su[:, None] * u + sv[:, None] * v
    if q.type_tag is PrimitiveType.SPHERE:
        center, radius = sphere_parameters(q)
        directions = rng.normal(size=(count, 3))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        return center + radius * directions
    if q.type_tag is PrimitiveType.CYLINDER:
        point, axis, radius = cylinder_parameters(q)
        u, v = _orthonormal_basis(axis)
        t = (corners - point) @ axis
        heights = rng.uniform(t.min(), t.max(), count)
        angles = rng.uniform(0.0, 2.0 * np.pi, count)
        radial = np.cos(angles)[:, None] * u + np.sin(angles)[:, None] * v
        return point + heights[:, None] * axis + radius * radial
    if q.type_tag is PrimitiveType.CONE:
        apex, axis, half_angle = cone_parameters(q)
        u, v = _orthonormal_basis(axis)
        t = (corners - apex) @ axis
        reach = np.linalg.norm(corners - apex, axis=1).max()
        t_lo, t_hi = max(t.min(), -reach), min(t.max(), reach)
        heights = rng.uniform(t_lo, t_hi, count)
        # the lateral area element grows with |t|
        keep = rng.uniform(0.0, 1.0, count) * max(abs(t_lo), abs(t_hi)) <= np.abs(heights)
        keep &= np.abs(heights) > APEX_EXCLUSION
        heights = heights[keep]
        angles = rng.uniform(0.0, 2.0 * np.pi, len(heights))
        radial = np.cos(angles)[:, None] * u + np.sin(angles)[:, None] * v
        return apex + heights[:, None] * (axis + np.tan(half_angle) * radial)
    raise GeometryError(f"cannot sample a {q.type_tag.value} primitive")


def sample_surface(bp: BoundedPrimitive, n: int, seed: int) -> np.ndarray:
    """
    Samples ``n`` points uniformly over the part of the surface inside ``bp.extent``.

    Args:
        bp (BoundedPrimitive): Primitive and its sampling box.
        n (int): Number of points, n >= 1.
        seed (int): RNG seed; equal seeds give equal samples.

    Returns:
        np.ndarray: n x 3 points.

    Raises:
        EmptyIntersection: No surface patch found in the box within 10·n draws.
    """
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    low, high = bp.extent[0] - EXTENT_TOL, bp.extent[1] + EXTENT_TOL
    accepted, total, attempts = [], 0, 0
    while total < n:
        if attempts >= 10 * n and total == 0:
            raise EmptyIntersection(f"no {bp.type_tag.value} surface inside the extent after {attempts} draws")
        if attempts >= 1000 * n:
            raise EmptyIntersection(f"surface inside the extent too small to sample {n} points")
        batch = _draw(bp, rng, _BATCH)
        attempts += _BATCH
        inside = batch[np.all((batch >= low) & (batch <= high), axis=1)]
        accepted.append(inside)
        total += len(inside)
    return np.concatenate(accepted)[:n]


def _newton_foot(p: np.ndarray, q: Quadric) -> np.ndarray:
    """Lagrangian foot point: x − p + μ∇f(x) = 0, f(x) = 0, from the Sampson step."""
    matrix = quadric_matrix(q)
    a33 = matrix[:3, :3]
    f0, g0 = evaluate(q, p), gradient(q, p)
    denom = g0 @ g0
    if denom < 1e-18:
        raise NoConvergence(p.copy(), abs(f0))
    mu = f0 / denom
    x = p - mu * g0
    best, best_res = x.copy(), abs(evaluate(q, x))
    for _ in range(NEWTON_STEPS):
        g = gradient(q, x)
        residual = np.concatenate([x - p + mu * g, [evaluate(q, x)]])
        jacobian = np.zeros((4, 4))
        jacobian[:3, :3] = np.eye(3) + 2.0 * mu * a33
        jacobian[:3, 3] = g
        jacobian[3, :3] = g
        try:
            step = np.linalg.solve(jacobian, -residual)
        except np.linalg.LinAlgError:
            break
        x, mu = x + step[:3], mu + step[3]
        res = abs(evaluate(q, x))
        if res < best_res:
            best, best_res = x.copy(), res
    if best_res >= SURFACE_TOL:
        raise NoConvergence(best, best_res)
    return best


def _cone_foot(p: np.ndarray, q: Quadric) -> np.ndarray:
    """Closed-form foot point in the plane through the axis; ties go to the +axis nappe."""
    apex, axis, half_angle = cone_parameters(q)
    rel = p - apex
    h = rel @ axis
    radial = rel - h * axis
    rho = np.linalg.norm(radial)
    e = radial / rho if rho > 1e-12 else _orthonormal_basis(axis)[0]
    best, best_dist = apex.copy(), np.linalg.norm(rel)
    for sign in (1.0, -1.0):
        generator = np.sin(half_angle) * e + sign * np.cos(half_angle) * axis
        t = rel @ generator
        if t <= 0:
            continue
        foot = apex + t * generator
        dist = np.linalg.norm(p - foot)
        if dist < best_dist - 1e-15:
            best, best_dist = foot, dist
    return best


def project(p, q: Quadric) -> np.ndarray:
    """
    Foot point of ``p`` on ``q``.

    Closed form for planes, spheres, cylinders and cones; Newton iteration
    on the Lagrangian system, started from the Sampson step, otherwise.

    Raises:
        NoConvergence: ``best`` holds the closest iterate.
    """
    p = np.asarray(p, dtype=np.float64).reshape(3)
    if q.type_tag is PrimitiveType.PLANE:
        normal, offset = plane_parameters(q)
        return p - (normal @ p + offset) * normal
    if q.type_tag is PrimitiveType.SPHERE:
        center, radius = sphere_parameters(q)
        offset = p - center
        norm = np.linalg.norm(offset)
        if norm < 1e-12:
            raise NoConvergence(p.copy(), abs(evaluate(q, p)))
        return center + radius * offset / norm
    if q.type_tag is PrimitiveType.CYLINDER:
        point, axis, radius = cylinder_parameters(q)
        rel = p - point
        along = (rel @ axis) * axis
        radial = rel - along
        norm = np.linalg.norm(radial)
        if norm < 1e-12:
            raise NoConvergence(p.copy(), abs(evaluate(q, p)))
        return point + along + radius * radial / norm
    if q.type_tag is PrimitiveType.CONE:
        return _cone_foot(p, q)
    return _newton_foot(p, q)


def project_points(points: np.ndarray, q: Quadric) -> tuple:
    """
    Projects every row of ``points``; failures keep the original point.

    Returns:
        tuple: (projected N x 3 array, boolean mask of rows that failed)
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    out = pts.copy()
    failed = np.zeros(len(pts), dtype=bool)
    for i, p in enumerate(pts):
        try:
            out[i] = project(p, q)
        except GeometryError:
            failed[i] = True
    return out, failed
