"""
Module: schemas
Data models for evaluation settings and reports.

Models:
1. `EvalConfig`: Sample counts, tolerances and seed of an evaluation.
2. `PrimitiveQuality`: Matched-primitive metrics of one shape.
3. `EvalReport`: Everything reported for one shape or an aggregate.
"""
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

__all__ = ('EvalConfig', 'PrimitiveQuality', 'EvalReport', 'SCALE')

# CD, HD, Type, Res and Cov are reported ×100
SCALE = 100.0


class EvalConfig(BaseModel):
    """
    Evaluation settings.

    Attributes:
        samples (int): Points sampled per primitive.
        epsilon (float): Coverage distance.
        tau (float): F-score distance.
        seed (int): Sampling seed; primitive i on either side uses ``seed + i``.
    """
    model_config = ConfigDict(extra="forbid")

    samples: int = Field(512, ge=1)
    epsilon: float = Field(0.01, gt=0)
    tau: float = Field(0.01, gt=0)
    seed: int = 0


class PrimitiveQuality(BaseModel):
    """
    Matched-pair metrics.

    Attributes:
        f1 (float): Mean per-pair point F-score, in [0, 1].
        type_acc (float): Percentage of pairs with the right type.
        axis_deg (Optional[float]): Mean axis angle over type-correct axis-bearing
            pairs; None when there is no such pair.
        res (float): Mean distance of ground-truth samples to the predicted surface, ×100.
        cov (float): Percentage of ground-truth samples within ``epsilon``.
        matched (int): Number of pairs.
    """
    f1: float
    type_acc: float
    axis_deg: Optional[float] = None
    res: float
    cov: float
    matched: int


class EvalReport(BaseModel):
    """
    Evaluation of one shape, or the mean over shapes.

    Geometric fields are None when the prediction holds no primitive; Axis and
    Res when no pair supports them. Aggregates average the available values.
    """
    cd: Optional[float] = None
    hd: Optional[float] = None
    nc: Optional[float] = None
    fscore: Optional[float] = None
    primitive_f1: float = 0.0
    type_acc: float = 0.0
    axis_deg: Optional[float] = None
    res: Optional[float] = None
    cov: float = 0.0
    evaluated: int = 0
    ground_truth: int = 0
    matched: int = 0
    shapes: int = 1
