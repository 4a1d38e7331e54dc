"""
Module: schemas
Request and response bodies of the HTTP service.
"""
from typing import List, Optional, Tuple

from pydantic import BaseModel, Field

from inference.schemas import PrimitiveRecord
from network.schemas import ModelConfig

__all__ = ('InferRequest', 'InferResponse', 'ModelInfo')


class InferRequest(BaseModel):
    """
    A partial scan to complete.

    Attributes:
        points (List[Tuple[float, float, float]]): Scan points, at least 16.
        threshold (Optional[float]): Confidence threshold; the service default when omitted.
        project (bool): Project the dense inlier points onto their primitive.
    """
    points: List[Tuple[float, float, float]] = Field(min_length=16)
    threshold: Optional[float] = Field(None, ge=0.0, le=1.0)
    project: bool = False


class InferResponse(BaseModel):
    primitives: List[PrimitiveRecord]


class ModelInfo(BaseModel):
    config: ModelConfig
    parameters: int
    threshold: float
