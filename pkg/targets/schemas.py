"""
Module: schemas
Data models for online target induction.

Models:
1. `PatchedPrediction`: Completed points grouped into U patches of J points.
2. `TargetAssignment`: Per-point and per-patch labels plus per-primitive patch sets.
"""
from typing import Dict, FrozenSet

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

__all__ = ('PatchedPrediction', 'TargetAssignment')


class PatchedPrediction(BaseModel):
    """
    Output of the point pathway.

    Attributes:
        patches (np.ndarray): U x J x 3 predicted points, U >= 1, J >= 1.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    patches: np.ndarray

    @field_validator("patches", mode="before")
    @classmethod
    def _patches_array(cls, value):
        patches = np.asarray(value, dtype=np.float64)
        if patches.ndim != 3 or patches.shape[2] != 3 or patches.shape[0] < 1 or patches.shape[1] < 1:
            raise ValueError("patches must have shape U x J x 3 with U, J >= 1")
        return patches

    @property
    def patch_count(self) -> int:
        return self.patches.shape[0]

    @property
    def patch_size(self) -> int:
        return self.patches.shape[1]

    @property
    def flat(self) -> np.ndarray:
        """All U·J points, patch-major."""
        return self.patches.reshape(-1, 3)


class TargetAssignment(BaseModel):
    """
    Online supervision for one prediction.

    Attributes:
        point_labels (np.ndarray): U x J primitive ids.
        patch_labels (np.ndarray): U primitive ids (majority votes).
        target_sets (Dict[int, FrozenSet[int]]): Primitive id g -> 0-based patch
            indices voted to g, for every g in 1..G (possibly empty).
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    point_labels: np.ndarray
    patch_labels: np.ndarray
    target_sets: Dict[int, FrozenSet[int]]

    @model_validator(mode="after")
    def _partition(self):
        covered = set()
        for g, members in self.target_sets.items():
            if covered & members:
                raise ValueError("target sets overlap")
            covered |= members
            if any(int(self.patch_labels[u]) != g for u in members):
                raise ValueError(f"target set {g} holds a patch voted elsewhere")
        if covered != set(range(len(self.patch_labels))):
            raise ValueError("target sets do not cover every patch")
        return self

    @property
    def primitive_count(self) -> int:
        return len(self.target_sets)

    def mask(self, g: int) -> np.ndarray:
        """0/1 indicator over patches for primitive ``g``."""
        out = np.zeros(len(self.patch_labels))
        out[list(self.target_sets[g])] = 1.0
        return out
