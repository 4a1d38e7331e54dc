"""
Module: schemas
Data models for labeled shapes, partial scans and generator specs.

Models:
1. `LabeledCloud`: Complete point set with per-point primitive ids and the primitive table.
2. `ScanProvenance`: Where a partial scan came from.
3. `PartialScan`: Cropped, downsampled and possibly noisy observation.
4. `ShapeSpec`: Parameters of the synthetic shape generator.
"""
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from geometry.schemas import BoundedPrimitive, PrimitiveType
from scene.errors import InvariantViolation

__all__ = ('LabeledCloud', 'ScanProvenance', 'PartialScan', 'ShapeSpec', 'PROTOCOL_RATIOS')

PROTOCOL_RATIOS = (0.25, 0.50, 0.75)


class LabeledCloud(BaseModel):
    """
    Complete shape: points, primitive labels in 1..G and the G ground-truth primitives.

    Attributes:
        points (np.ndarray): N x 3 points in normalized shape coordinates.
        labels (np.ndarray): N primitive ids; id g refers to ``primitives[g - 1]``.
        primitives (List[BoundedPrimitive]): Primitive table.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    points: np.ndarray
    labels: np.ndarray
    primitives: List[BoundedPrimitive]

    @field_validator("points", mode="before")
    @classmethod
    def _points_array(cls, value):
        return np.asarray(value, dtype=np.float64).reshape(-1, 3)

    @field_validator("labels", mode="before")
    @classmethod
    def _labels_array(cls, value):
        return np.asarray(value, dtype=np.int64).reshape(-1)

    @model_validator(mode="after")
    def _check(self):
        n, g = len(self.points), len(self.primitives)
        if n == 0:
            raise InvariantViolation("non_empty", "cloud has no points")
        if len(self.labels) != n:
            raise InvariantViolation("label_count", f"{len(self.labels)} labels for {n} points")
        if np.any(self.labels < 1) or np.any(self.labels > g):
            raise InvariantViolation("label_range", f"labels must reference primitives 1..{g}")
        supported = np.bincount(self.labels, minlength=g + 1)[1:]
        if np.any(supported == 0):
            missing = int(np.flatnonzero(supported == 0)[0]) + 1
            raise InvariantViolation("primitive_support", f"primitive {missing} has no supporting point")
        for prim in self.primitives:
            if prim.type_tag is PrimitiveType.NULL:
                raise InvariantViolation("primitive_type", "null primitives cannot be ground truth")
        return self

    @property
    def primitive_count(self) -> int:
        return len(self.primitives)

    @property
    def types(self) -> List[PrimitiveType]:
        return [prim.type_tag for prim in self.primitives]

    def support_of(self, primitive_id: int) -> np.ndarray:
        return self.points[self.labels == primitive_id]

    def type_counts(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for t in self.types:
            counts[t.value] = counts.get(t.value, 0) + 1
        return counts


class ScanProvenance(BaseModel):
    """
    Provenance of a partial scan.

    Attributes:
        shape_id (str): Identifier of the source shape.
        ratio (Optional[float]): Incompleteness ratio of the crop.
        crop_seed (Optional[int]): Seed of the crop direction and downsampling.
        noise_sigma (float): Jitter as a fraction of the unit-cube diagonal.
    """
    shape_id: str = ""
    ratio: Optional[float] = None
    crop_seed: Optional[int] = None
    noise_sigma: float = 0.0


class PartialScan(BaseModel):
    """
    Partial observation of a shape.

    Attributes:
        points (np.ndarray): M x 3 points.
        source (ScanProvenance): Where the points came from.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    points: np.ndarray
    source: ScanProvenance = Field(default_factory=ScanProvenance)

    @field_validator("points", mode="before")
    @classmethod
    def _points_array(cls, value):
        points = np.asarray(value, dtype=np.float64).reshape(-1, 3)
        if len(points) == 0:
            raise ValueError("scan has no points")
        return points


class ShapeSpec(BaseModel):
    """
    Synthetic shape generator parameters.

    Attributes:
        primitive_count_range (Tuple[int, int]): Inclusive bounds on the primitive count.
        type_mix (Dict[PrimitiveType, float]): Feature weights per primitive type.
        point_count (int): Number of labeled surface points.
        seed (int): RNG seed.
    """
    model_config = ConfigDict(extra="forbid")

    primitive_count_range: Tuple[int, int] = (6, 9)
    # feature weights only; box faces and boss sides still make planes the most common type
    type_mix: Dict[PrimitiveType, float] = Field(default_factory=lambda: {
        PrimitiveType.PLANE: 0.15,
        PrimitiveType.CYLINDER: 0.55,
        PrimitiveType.CONE: 0.2,
        PrimitiveType.SPHERE: 0.1,
    })
    point_count: int = Field(8192, ge=16)
    seed: int = 0

    @field_validator("primitive_count_range")
    @classmethod
    def _count_range(cls, value):
        lo, hi = value
        if not 2 <= lo <= hi <= 38:
            raise ValueError("primitive_count_range must satisfy 2 <= lo <= hi <= 38")
        return value

    @field_validator("type_mix")
    @classmethod
    def _mix(cls, value):
        if PrimitiveType.NULL in value:
            raise ValueError("type_mix cannot weight the null class")
        if any(w < 0 for w in value.values()) or sum(value.values()) <= 0:
            raise ValueError("type_mix weights must be nonnegative and not all zero")
        return value
