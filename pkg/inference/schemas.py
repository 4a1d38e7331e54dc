"""
Module: schemas
Data models for scored candidates and the primitive export format.

Models:
1. `PrimitiveSource`: Where a candidate's quadric comes from.
2. `Candidate`: One proxy's prediction with its confidence and dense inlier points.
3. `CandidateSet`: Ordered candidates of one forward pass.
4. `InferenceConfig`: Selection threshold, projection and quadric source.
5. `PrimitiveRecord`: One entry of the export JSON array.
"""
from enum import Enum
from typing import FrozenSet, Iterator, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from geometry.schemas import PrimitiveType, Quadric

__all__ = ('PrimitiveSource', 'Candidate', 'CandidateSet', 'InferenceConfig', 'PrimitiveRecord')


class PrimitiveSource(str, Enum):
    ANALYTIC = "analytic"
    FITTED = "fitted"


class Candidate(BaseModel):
    """
    A candidate primitive decoded from one proxy.

    Attributes:
        index (int): Proxy index k.
        probs (np.ndarray): Type distribution, null class last.
        type_tag (PrimitiveType): Arg max over the non-null classes.
        membership (np.ndarray): Membership row over the U patches.
        inliers (FrozenSet[int]): Patches with membership ≥ 0.5.
        coeffs (np.ndarray): Raw head coefficients.
        quadric (Optional[Quadric]): Type-consistent surface; None when neither
            snapping nor fitting produced one.
        score (float): Confidence in [0, 1].
        points (np.ndarray): Union of the inlier patches (possibly projected).
        projected (bool): ``points`` were moved onto ``quadric``.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    index: int
    probs: np.ndarray
    type_tag: PrimitiveType
    membership: np.ndarray
    inliers: FrozenSet[int]
    coeffs: np.ndarray
    quadric: Optional[Quadric] = None
    score: float = Field(ge=0.0, le=1.0)
    points: np.ndarray
    projected: bool = False

    @field_validator("type_tag")
    @classmethod
    def _geometric(cls, value):
        if value is PrimitiveType.NULL:
            raise ValueError("a candidate's predicted type is never null")
        return value

    @field_validator("points", mode="before")
    @classmethod
    def _points_array(cls, value):
        return np.asarray(value, dtype=np.float64).reshape(-1, 3)


class CandidateSet(BaseModel):
    """Candidates in proxy order."""
    candidates: List[Candidate] = Field(default_factory=list)

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self) -> Iterator[Candidate]:
        return iter(self.candidates)

    def __getitem__(self, position: int) -> Candidate:
        return self.candidates[position]

    @property
    def scores(self) -> List[float]:
        return [c.score for c in self.candidates]

    @property
    def indices(self) -> List[int]:
        return [c.index for c in self.candidates]


class InferenceConfig(BaseModel):
    """
    Inference options.

    Attributes:
        threshold (float): Candidates with score ≥ threshold are kept.
        project (bool): Move the dense inlier points onto their quadric.
        source (PrimitiveSource): Head quadric snapped to the type, or a quadric
            fitted to the dense inlier points.
        include_points (bool): Write the dense points into the export.
    """
    model_config = ConfigDict(extra="forbid")

    threshold: float = Field(0.5, ge=0.0, le=1.0)
    project: bool = False
    source: PrimitiveSource = PrimitiveSource.ANALYTIC
    include_points: bool = True


class PrimitiveRecord(BaseModel):
    """
    One exported primitive.

    Attributes:
        type (PrimitiveType): plane, cylinder, sphere or cone.
        coeffs (List[float]): Ten canonical quadric coefficients.
        score (float): Confidence.
        inlier_patches (List[int]): Sorted inlier patch indices.
        points (Optional[List[Tuple[float, float, float]]]): Dense inlier points.
    """
    model_config = ConfigDict(extra="forbid")

    type: PrimitiveType
    coeffs: List[float] = Field(min_length=10, max_length=10)
    score: float = Field(ge=0.0, le=1.0)
    inlier_patches: List[int]
    points: Optional[List[Tuple[float, float, float]]] = None

    @field_validator("type")
    @classmethod
    def _geometric(cls, value):
        if value is PrimitiveType.NULL:
            raise ValueError("null primitives are not exported")
        return value

    @field_validator("inlier_patches")
    @classmethod
    def _indices(cls, value):
        if any(u < 0 for u in value):
            raise ValueError("patch indices are non-negative")
        return value
