"""
Module: schemas
Data models for quadric primitives.

Models:
1. `PrimitiveType`: The five primitive classes, ``Null`` encoding the no-object class.
2. `Quadric`: Canonically normalized homogeneous quadric with its type tag.
3. `BoundedPrimitive`: A quadric together with its inlier evidence and extent.
4. `RansacConfig`: Parameters of the sequential RANSAC extractor.
"""
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

__all__ = ('PrimitiveType', 'Quadric', 'BoundedPrimitive', 'RansacConfig',
           'COEFF_NAMES', 'QUADRATIC_INDICES', 'LINEAR_INDICES')

COEFF_NAMES = ("a11", "a22", "a33", "a44", "a12", "a13", "a14", "a23", "a24", "a34")
# coefficients of the upper-left 3x3 block
QUADRATIC_INDICES = (0, 1, 2, 4, 5, 7)
LINEAR_INDICES = (6, 8, 9)


class PrimitiveType(str, Enum):
    """Primitive classes; member order is the class index used by the network."""
    PLANE = "plane"
    CYLINDER = "cylinder"
    SPHERE = "sphere"
    CONE = "cone"
    NULL = "null"

    @classmethod
    def geometric(cls) -> Tuple["PrimitiveType", ...]:
        return cls.PLANE, cls.CYLINDER, cls.SPHERE, cls.CONE

    def class_index(self, type_count: int = 5) -> int:
        """
        Index of this type in a ``type_count``-way distribution.

        The plane-only variant uses two classes: plane and null.
        """
        if type_count == 2:
            if self is PrimitiveType.PLANE:
                return 0
            if self is PrimitiveType.NULL:
                return 1
            raise ValueError(f"{self.value} is not representable in the plane-only variant")
        return list(PrimitiveType).index(self)

    @classmethod
    def from_index(cls, index: int, type_count: int = 5) -> "PrimitiveType":
        if type_count == 2:
            return (cls.PLANE, cls.NULL)[index]
        return list(cls)[index]


class Quadric(BaseModel):
    """
    Surface xᵀAx = 0 with symmetric 4x4 A in homogeneous coordinates.

    Instances are produced by ``quadric_from_coeffs``; ``coeffs`` holds the ten
    unique entries of A in ``COEFF_NAMES`` order, with ‖A‖_F = 1 and the first
    nonzero coefficient positive.
    """
    model_config = ConfigDict(frozen=True)

    coeffs: Tuple[float, float, float, float, float, float, float, float, float, float]
    type_tag: PrimitiveType

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=np.float64)


class BoundedPrimitive(BaseModel):
    """
    A quadric restricted to the axis-aligned box around its inlier evidence.

    Attributes:
        quadric (Quadric): The surface.
        support (np.ndarray): S x 3 inlier points, S >= 1.
        extent (np.ndarray): 2 x 3 array of box minimum and maximum corners.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    quadric: Quadric
    support: np.ndarray
    extent: Optional[np.ndarray] = None

    @field_validator("support", mode="before")
    @classmethod
    def _support_array(cls, value):
        support = np.asarray(value, dtype=np.float64).reshape(-1, 3)
        if len(support) == 0:
            raise ValueError("support must contain at least one point")
        return support

    @field_validator("extent", mode="before")
    @classmethod
    def _extent_array(cls, value):
        if value is None:
            return None
        return np.asarray(value, dtype=np.float64).reshape(2, 3)

    @model_validator(mode="after")
    def _check_extent(self):
        if self.extent is None:
            object.__setattr__(self, "extent", np.stack([self.support.min(axis=0), self.support.max(axis=0)]))
        else:
            extent = np.asarray(self.extent, dtype=np.float64).reshape(2, 3)
            tol = 1e-9
            if np.any(self.support < extent[0] - tol) or np.any(self.support > extent[1] + tol):
                raise ValueError("extent does not enclose the support")
            object.__setattr__(self, "extent", extent)
        return self

    @property
    def type_tag(self) -> PrimitiveType:
        return self.quadric.type_tag


class RansacConfig(BaseModel):
    """
    Parameters for sequential greedy RANSAC.

    Attributes:
        epsilon (float): Inlier distance threshold.
        min_support (int): Smallest accepted inlier count.
        max_primitives (int): Upper bound on extracted primitives.
        iterations (int): Minimal-set draws per type and round.
        types (tuple): Candidate primitive types, in preference order on ties.
        seed (int): RNG seed.
    """
    model_config = ConfigDict(extra="forbid")

    epsilon: float = Field(0.01, gt=0)
    min_support: int = Field(50, ge=1)
    max_primitives: int = Field(20, ge=1)
    iterations: int = Field(200, ge=1)
    types: Tuple[PrimitiveType, ...] = PrimitiveType.geometric()
    seed: int = 0

    @field_validator("types")
    @classmethod
    def _no_null(cls, value):
        if PrimitiveType.NULL in value or not value:
            raise ValueError("types must be a non-empty subset of plane/cylinder/sphere/cone")
        return value
