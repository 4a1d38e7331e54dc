"""
Module: schemas
Data models for set matching and the training objective.

Models:
1. `CostWeights`: Loss weights and ablation switches.
2. `PairTerms`: Weighted cost terms of one (candidate, target) pair.
3. `MatchResult`: Bipartite assignment with its per-pair terms.
4. `CandidateInput` / `TargetInput`: One side of a pair cost.
5. `PredictionView` / `TargetView`: Whole-shape inputs of the total loss.
6. `LossBreakdown` / `OutputGradients`: Total loss terms and gradients w.r.t. the network outputs.
"""
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from geometry.schemas import PrimitiveType

__all__ = ('CostWeights', 'PairTerms', 'MatchResult', 'CandidateInput', 'TargetInput',
           'PredictionView', 'TargetView', 'LossBreakdown', 'OutputGradients')

MEMBERSHIP_THRESHOLD = 0.5


class CostWeights(BaseModel):
    """
    Matching and loss weights.

    Attributes:
        alpha1_pos (float): Semantic weight for matched candidates.
        alpha1_null (float): Semantic weight of the no-object term for unmatched candidates.
        alpha2 (float): Membership (CE + Dice) weight.
        alpha3 (float): Geometry weight.
        lambda_ (float): Parameter L1 weight inside the geometry term (``lambda`` in JSON).
        use_ce (bool): Include the cross-entropy membership term.
        use_dice (bool): Include the Dice membership term.
        use_primitive_chamfer (bool): Include the per-primitive Chamfer term.
        use_parameter (bool): Include the parameter L1 term.
        empty_cd_penalty (float): Chamfer value used when either point set is empty.
        prob_clamp (float): Probabilities are clamped to [clamp, 1 - clamp].
    """
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    alpha1_pos: float = Field(0.05, ge=0)
    alpha1_null: float = Field(0.01, ge=0)
    alpha2: float = Field(0.125, ge=0)
    alpha3: float = Field(1.0, ge=0)
    lambda_: float = Field(0.05, ge=0, alias="lambda")
    use_ce: bool = True
    use_dice: bool = True
    use_primitive_chamfer: bool = True
    use_parameter: bool = True
    empty_cd_penalty: float = Field(1.0, ge=0)
    prob_clamp: float = Field(1e-7, gt=0, lt=0.5)


class PairTerms(BaseModel):
    """Weighted terms of one pair cost; ``total`` is their sum."""
    semantic: float = 0.0
    membership: float = 0.0
    primitive_chamfer: float = 0.0
    parameter: float = 0.0

    @property
    def total(self) -> float:
        return self.semantic + self.membership + self.primitive_chamfer + self.parameter


class MatchResult(BaseModel):
    """
    Minimum-cost partial injection between candidates (rows) and targets (columns).

    Attributes:
        pairs (List[Tuple[int, int]]): 0-based (candidate, target) pairs sorted by candidate.
        total (float): Sum of the matched costs.
        unmatched (List[int]): Candidates without a target.
        terms (Dict[int, PairTerms]): Cost breakdown per matched candidate, when known.
    """
    pairs: List[Tuple[int, int]]
    total: float
    unmatched: List[int]
    terms: Dict[int, PairTerms] = Field(default_factory=dict)

    def target_of(self, candidate: int) -> Optional[int]:
        for k, g in self.pairs:
            if k == candidate:
                return g
        return None


class CandidateInput(BaseModel):
    """
    One predicted candidate as seen by the pair cost.

    Attributes:
        probs (np.ndarray): Type distribution, null class last.
        membership (np.ndarray): U membership probabilities.
        coeffs (np.ndarray): Raw (unnormalized) ten quadric coefficients.
        points (np.ndarray): P x 3 dense inlier points, possibly empty.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    probs: np.ndarray
    membership: np.ndarray
    coeffs: np.ndarray
    points: np.ndarray

    @property
    def type_count(self) -> int:
        return len(self.probs)


class TargetInput(BaseModel):
    """
    One ground-truth primitive as seen by the pair cost.

    Attributes:
        type_tag (PrimitiveType): Ground-truth type, never null.
        mask (np.ndarray): U 0/1 patch indicator of the target set.
        coeffs (np.ndarray): Canonical ten coefficients.
        points (np.ndarray): S x 3 ground-truth support.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    type_tag: PrimitiveType
    mask: np.ndarray
    coeffs: np.ndarray
    points: np.ndarray

    @field_validator("type_tag")
    @classmethod
    def _geometric(cls, value):
        if value is PrimitiveType.NULL:
            raise ValueError("targets cannot be null")
        return value


class PredictionView(BaseModel):
    """
    Network outputs entering the loss.

    Attributes:
        probs (np.ndarray): K x C type distributions (null last).
        membership (np.ndarray): K x U membership matrix.
        coeffs (np.ndarray): K x 10 raw quadric coefficients.
        patches (np.ndarray): U x J x 3 completed points.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    probs: np.ndarray
    membership: np.ndarray
    coeffs: np.ndarray
    patches: np.ndarray

    @property
    def candidate_count(self) -> int:
        return self.probs.shape[0]

    def inlier_patches(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.membership[k] >= MEMBERSHIP_THRESHOLD)

    def candidate(self, k: int) -> CandidateInput:
        inliers = self.inlier_patches(k)
        return CandidateInput(probs=self.probs[k], membership=self.membership[k], coeffs=self.coeffs[k],
                              points=self.patches[inliers].reshape(-1, 3))


class TargetView(BaseModel):
    """
    Ground truth entering the loss.

    Attributes:
        types (List[PrimitiveType]): G target types.
        masks (np.ndarray): G x U target-set indicators.
        coeffs (np.ndarray): G x 10 canonical coefficients.
        supports (List[np.ndarray]): Ground-truth points per primitive.
        points (np.ndarray): All N ground-truth points, for the completion term.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    types: List[PrimitiveType]
    masks: np.ndarray
    coeffs: np.ndarray
    supports: List[np.ndarray]
    points: np.ndarray

    @property
    def target_count(self) -> int:
        return len(self.types)

    def target(self, g: int) -> TargetInput:
        return TargetInput(type_tag=self.types[g], mask=self.masks[g], coeffs=self.coeffs[g],
                           points=self.supports[g])


class LossBreakdown(BaseModel):
    """
    Terms of the total loss; ``total`` is their sum.

    Attributes:
        semantic (float): Matched-candidate type terms.
        null (float): No-object terms of unmatched candidates.
        membership (float): Matched membership terms.
        primitive_chamfer (float): Matched inlier-to-support Chamfer terms.
        parameter (float): Matched quadric L1 terms.
        completion (float): Chamfer between completed and ground-truth points.
    """
    semantic: float = 0.0
    null: float = 0.0
    membership: float = 0.0
    primitive_chamfer: float = 0.0
    parameter: float = 0.0
    completion: float = 0.0

    @property
    def total(self) -> float:
        return (self.semantic + self.null + self.membership + self.primitive_chamfer
                + self.parameter + self.completion)

    def as_record(self) -> Dict[str, float]:
        record = self.model_dump()
        record["total"] = self.total
        return record


class OutputGradients(BaseModel):
    """Gradients of the total loss w.r.t. each ``PredictionView`` field."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    d_probs: np.ndarray
    d_membership: np.ndarray
    d_coeffs: np.ndarray
    d_patches: np.ndarray

    @classmethod
    def zeros_like(cls, pred: PredictionView) -> "OutputGradients":
        return cls(d_probs=np.zeros_like(pred.probs), d_membership=np.zeros_like(pred.membership),
                   d_coeffs=np.zeros_like(pred.coeffs), d_patches=np.zeros_like(pred.patches))
