"""
Module: generator
Synthetic CAD-like shapes with exact primitive labels.

A shape starts from a box (six planes). Features are attached to or cut into
its faces until the requested primitive count is reached:

- plane: rectangular boss (+5 planes: four sides and a top)
- cylinder: cylindrical boss or hole (+cylinder, +disk plane)
- sphere: spherical dome (+sphere)
- cone: conical spike (+cone)

Every surface patch is sampled area-uniformly, the cloud is normalized into the
unit cube centred at the origin and the primitives are carried along.
"""
from typing import Callable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from geometry.quadric import make_cone, make_cylinder, make_plane, make_sphere, transform_quadric
from geometry.schemas import BoundedPrimitive, PrimitiveType, Quadric
from logs.project_log import main_logger
from scene.errors import SpecInfeasible
from scene.schemas import LabeledCloud, ShapeSpec

__all__ = ('generate_shape', 'FEATURE_SIZE', 'MAX_ATTEMPTS')

FEATURE_SIZE = {
    PrimitiveType.PLANE: 5,
    PrimitiveType.CYLINDER: 2,
    PrimitiveType.SPHERE: 1,
    PrimitiveType.CONE: 1,
}
MAX_ATTEMPTS = 100
_PLACEMENT_TRIES = 20

Sampler = Callable[[np.random.Generator, int], np.ndarray]


class _Patch(BaseModel):
    """One primitive of the composite: its surface, sampler and area."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    quadric: Quadric
    area: float
    sampler: Sampler


class _Face:
    """Box face with outward normal ``sign·e_axis`` and in-plane axes ``e_j``, ``e_k``."""

    def __init__(self, axis: int, sign: float, half: np.ndarray):
        self.axis, self.sign = axis, sign
        self.j, self.k = [i for i in range(3) if i != axis]
        self.level = half[axis]
        self.half_u, self.half_v = half[self.j], half[self.k]
        self.normal = np.eye(3)[axis] * sign
        self.footprints: List[Tuple[float, float, float, str]] = []  # (u, v, size, shape)

    def point(self, u, v, t) -> np.ndarray:
        """Point at in-plane (u, v) and height t above the face along the outward normal."""
        u, v, t = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float), np.asarray(t, float))
        out = np.zeros(u.shape + (3,))
        out[..., self.axis] = self.sign * (self.level + t)
        out[..., self.j] = u
        out[..., self.k] = v
        return out

    def inside_footprint(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        hit = np.zeros(u.shape, dtype=bool)
        for cu, cv, size, shape in self.footprints:
            if shape == "disk":
                hit |= (u - cu) ** 2 + (v - cv) ** 2 < size ** 2
            else:
                hit |= (np.abs(u - cu) < size) & (np.abs(v - cv) < size)
        return hit

    def free_area(self) -> float:
        area = 4.0 * self.half_u * self.half_v
        for _, _, size, shape in self.footprints:
            area -= np.pi * size ** 2 if shape == "disk" else 4.0 * size ** 2
        return area


def _disk(rng: np.random.Generator, count: int, radius: float) -> Tuple[np.ndarray, np.ndarray]:
    rho = radius * np.sqrt(rng.uniform(0.0, 1.0, count))
    phi = rng.uniform(0.0, 2.0 * np.pi, count)
    return rho * np.cos(phi), rho * np.sin(phi)


class _ShapeBuilder:
    """Accumulates box faces and feature patches for one shape."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.half = rng.uniform(0.25, 0.5, 3)
        self.faces = [_Face(axis, sign, self.half) for axis in range(3) for sign in (1.0, -1.0)]
        self.min_half = float(self.half.min())
        self.patches: List[_Patch] = []

    def box_patches(self) -> List[_Patch]:
        out = []
        for face in self.faces:
            out.append(_Patch(quadric=make_plane(face.normal, -face.level), area=face.free_area(),
                              sampler=self._face_sampler(face)))
        return out

    def _face_sampler(self, face: _Face) -> Sampler:
        def sample(rng: np.random.Generator, count: int) -> np.ndarray:
            chunks, total = [], 0
            while total < count:
                u = rng.uniform(-face.half_u, face.half_u, 2 * count + 16)
                v = rng.uniform(-face.half_v, face.half_v, 2 * count + 16)
                keep = ~face.inside_footprint(u, v)
                chunks.append(face.point(u[keep], v[keep], 0.0))
                total += int(keep.sum())
            return np.concatenate(chunks)[:count]
        return sample

    def _place(self, size: float, shape: str, margin: float) -> Optional[Tuple[_Face, float, float]]:
        """Finds a face position whose footprint stays ``margin`` inside the face and clear of others."""
        reach = size * (np.sqrt(2.0) if shape == "square" else 1.0)
        for _ in range(_PLACEMENT_TRIES):
            face = self.faces[self.rng.integers(len(self.faces))]
            lim_u, lim_v = face.half_u - reach - margin, face.half_v - reach - margin
            if lim_u <= 0 or lim_v <= 0:
                continue
            cu, cv = self.rng.uniform(-lim_u, lim_u), self.rng.uniform(-lim_v, lim_v)
            clear = True
            for ou, ov, osize, oshape in face.footprints:
                other = osize * (np.sqrt(2.0) if oshape == "square" else 1.0)
                if np.hypot(cu - ou, cv - ov) < reach + other + 0.02:
                    clear = False
                    break
            if clear:
                face.footprints.append((cu, cv, size, shape))
                return face, cu, cv
        return None

    def add_feature(self, kind: PrimitiveType) -> bool:
        rng = self.rng
        height = rng.uniform(0.3, 0.6) * self.min_half
        size = rng.uniform(0.15, 0.3) * self.min_half
        if kind is PrimitiveType.PLANE:
            placed = self._place(size, "square", 0.0)
            if placed is None:
                return False
            self.patches.extend(self._rect_boss(*placed, size, height))
        elif kind is PrimitiveType.CYLINDER:
            hole = bool(rng.integers(2))
            placed = self._place(size, "disk", 0.6 * self.min_half if hole else 0.0)
            if placed is None:
                return False
            self.patches.extend(self._cylinder(*placed, size, -height if hole else height))
        elif kind is PrimitiveType.SPHERE:
            placed = self._place(size, "disk", 0.0)
            if placed is None:
                return False
            self.patches.append(self._dome(*placed, size))
        else:
            placed = self._place(size, "disk", 0.0)
            if placed is None:
                return False
            self.patches.append(self._spike(*placed, size, height))
        return True

    @staticmethod
    def _rect_boss(face: _Face, cu: float, cv: float, s: float, h: float) -> List[_Patch]:
        def top(rng, count):
            return face.point(cu + rng.uniform(-s, s, count), cv + rng.uniform(-s, s, count), h)

        patches = [_Patch(quadric=make_plane(face.normal, -(face.level + h)), area=4 * s * s, sampler=top)]
        e_u, e_v = np.eye(3)[face.j], np.eye(3)[face.k]
        for direction, along_u in ((1.0, True), (-1.0, True), (1.0, False), (-1.0, False)):
            def side(rng, count, direction=direction, along_u=along_u):
                t = rng.uniform(0.0, h, count)
                w = rng.uniform(-s, s, count)
                if along_u:
                    return face.point(np.full(count, cu + direction * s), cv + w, t)
                return face.point(cu + w, np.full(count, cv + direction * s), t)
            normal = direction * (e_u if along_u else e_v)
            offset = -direction * ((cu if along_u else cv) + direction * s)
            patches.append(_Patch(quadric=make_plane(normal, offset), area=2 * s * h, sampler=side))
        return patches

    @staticmethod
    def _cylinder(face: _Face, cu: float, cv: float, r: float, h: float) -> List[_Patch]:
        """Boss for h > 0, hole of depth |h| for h < 0."""
        def lateral(rng, count):
            phi = rng.uniform(0.0, 2.0 * np.pi, count)
            t = rng.uniform(min(0.0, h), max(0.0, h), count)
            return face.point(cu + r * np.cos(phi), cv + r * np.sin(phi), t)

        def cap(rng, count):
            du, dv = _disk(rng, count, r)
            return face.point(cu + du, cv + dv, np.full(count, h))

        axis_point = face.point(cu, cv, 0.0)
        return [
            _Patch(quadric=make_cylinder(axis_point, face.normal, r), area=2 * np.pi * r * abs(h), sampler=lateral),
            _Patch(quadric=make_plane(face.normal, -(face.level + h)), area=np.pi * r * r, sampler=cap),
        ]

    @staticmethod
    def _dome(face: _Face, cu: float, cv: float, r: float) -> _Patch:
        center = face.point(cu, cv, 0.0)

        def sample(rng, count):
            d = rng.normal(size=(count, 3))
            d /= np.linalg.norm(d, axis=1, keepdims=True)
            outward = d @ face.normal
            d[outward < 0] -= 2.0 * outward[outward < 0, None] * face.normal
            return center + r * d

        return _Patch(quadric=make_sphere(center, r), area=2 * np.pi * r * r, sampler=sample)

    @staticmethod
    def _spike(face: _Face, cu: float, cv: float, r: float, h: float) -> _Patch:
        apex = face.point(cu, cv, h)
        half_angle = float(np.arctan2(r, h))

        def sample(rng, count):
            # distance below the apex, density ∝ depth for area uniformity
            depth = h * np.sqrt(rng.uniform(1e-10, 1.0, count))
            phi = rng.uniform(0.0, 2.0 * np.pi, count)
            rho = depth * r / h
            return face.point(cu + rho * np.cos(phi), cv + rho * np.sin(phi), h - depth)

        return _Patch(quadric=make_cone(apex, -face.normal, half_angle),
                      area=np.pi * r * np.hypot(r, h), sampler=sample)


def _allocate(areas: np.ndarray, total: int) -> np.ndarray:
    """Largest-remainder split of ``total`` proportional to ``areas`` with at least one per patch."""
    if total < len(areas):
        raise SpecInfeasible(f"{total} points cannot cover {len(areas)} primitives")
    spare = total - len(areas)
    share = spare * areas / areas.sum()
    counts = np.floor(share).astype(np.int64)
    order = np.argsort(-(share - counts), kind="stable")
    counts[order[:spare - counts.sum()]] += 1
    return counts + 1


def _normalizing_transform(points: np.ndarray, rotation: np.ndarray) -> np.ndarray:
    rotated = points @ rotation.T
    low, high = rotated.min(axis=0), rotated.max(axis=0)
    scale = 1.0 / float(np.max(high - low))
    center = 0.5 * (low + high)
    transform = np.eye(4)
    transform[:3, :3] = scale * rotation
    transform[:3, 3] = -scale * center
    return transform


def _random_rotation(rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def _draw_count(spec: ShapeSpec, rng: np.random.Generator) -> int:
    lo, hi = spec.primitive_count_range
    return int(rng.integers(lo, hi + 1))


def _try_build(spec: ShapeSpec, rng: np.random.Generator) -> Optional[List[_Patch]]:
    target = _draw_count(spec, rng)
    if target < 6:
        return None
    builder = _ShapeBuilder(rng)
    kinds = [t for t in FEATURE_SIZE if spec.type_mix.get(t, 0.0) > 0]
    remaining = target - 6
    while remaining > 0:
        fitting = [t for t in kinds if FEATURE_SIZE[t] <= remaining]
        if not fitting:
            return None
        weights = np.array([spec.type_mix[t] for t in fitting])
        kind = fitting[int(rng.choice(len(fitting), p=weights / weights.sum()))]
        if not builder.add_feature(kind):
            return None
        remaining -= FEATURE_SIZE[kind]
    return builder.box_patches() + builder.patches


def generate_shape(spec: ShapeSpec, random_pose: bool = False) -> LabeledCloud:
    """
    Builds one labeled composite shape.

    Args:
        spec (ShapeSpec): Count range, feature mix, point count and seed.
        random_pose (bool): Rotate the shape randomly before normalization.

    Returns:
        LabeledCloud: ``spec.point_count`` labeled points in the unit cube.

    Raises:
        SpecInfeasible: No shape with a drawn count was realized in 100 attempts.
    """
    rng = np.random.default_rng(spec.seed)
    patches = None
    for attempt in range(MAX_ATTEMPTS):
        patches = _try_build(spec, rng)
        if patches is not None:
            break
        main_logger.debug("shape attempt %d failed for seed %d", attempt, spec.seed)
    if patches is None:
        raise SpecInfeasible(f"could not realize {spec.primitive_count_range} primitives in {MAX_ATTEMPTS} attempts")

    counts = _allocate(np.array([p.area for p in patches]), spec.point_count)
    points = np.concatenate([p.sampler(rng, int(n)) for p, n in zip(patches, counts)])
    labels = np.repeat(np.arange(1, len(patches) + 1), counts)

    rotation = _random_rotation(rng) if random_pose else np.eye(3)
    transform = _normalizing_transform(points, rotation)
    points = points @ transform[:3, :3].T + transform[:3, 3]
    primitives = [
        BoundedPrimitive(quadric=transform_quadric(p.quadric, transform), support=points[labels == i + 1])
        for i, p in enumerate(patches)
    ]
    main_logger.debug("generated shape seed=%d with %d primitives", spec.seed, len(primitives))
    return LabeledCloud(points=points, labels=labels, primitives=primitives)
