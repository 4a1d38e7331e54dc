"""
Module: schemas
Data models for the two-pathway model.

Models:
1. `ModelConfig`: Architecture sizes, with ``desk`` and ``full`` presets.
2. `OptimizerConfig`: AdamW with step decay.
3. `ModelParams`: Named parameter tensors in declaration order.
4. `ForwardOutput`: Network outputs plus the cache needed by backward.
5. `OptimizerState`: AdamW moments and step counter.
"""
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

__all__ = ('ModelConfig', 'OptimizerConfig', 'ModelParams', 'ForwardOutput', 'OptimizerState',
           'POINT_PATHWAY', 'MIN_INPUT_POINTS')

MIN_INPUT_POINTS = 16
# parameter name prefixes owned by the point pathway; everything else is the primitive pathway
POINT_PATHWAY = ("encoder.", "points.")


class ModelConfig(BaseModel):
    """
    Architecture sizes.

    Attributes:
        patches (int): U, number of shape features and point patches.
        patch_size (int): J, points per patch.
        proxies (int): K, number of primitive proxies.
        width (int): d, hidden width.
        layers (int): Contextualization blocks.
        heads (int): Attention heads; must divide ``width``.
        type_count (int): 5 (plane, cylinder, sphere, cone, null) or 2 (plane, null).
        seed (int): Initialization seed.
    """
    model_config = ConfigDict(extra="forbid")

    patches: int = Field(32, ge=1)
    patch_size: int = Field(16, ge=1)
    proxies: int = Field(8, ge=1)
    width: int = Field(32, ge=1)
    layers: int = Field(2, ge=1)
    heads: int = Field(2, ge=1)
    type_count: int = 5
    seed: int = 0

    @model_validator(mode="after")
    def _check(self):
        if self.width % self.heads:
            raise ValueError("width must be divisible by heads")
        if self.type_count not in (2, 5):
            raise ValueError("type_count must be 5, or 2 for the plane-only variant")
        return self

    @property
    def completed_points(self) -> int:
        return self.patches * self.patch_size

    @property
    def plane_only(self) -> bool:
        return self.type_count == 2

    @classmethod
    def desk(cls, **overrides) -> "ModelConfig":
        return cls(**overrides)

    @classmethod
    def full(cls, **overrides) -> "ModelConfig":
        values = dict(patches=512, patch_size=16, proxies=40, width=128, layers=4, heads=8)
        values.update(overrides)
        return cls(**values)


class OptimizerConfig(BaseModel):
    """
    AdamW with decoupled weight decay and a multiplicative step schedule.

    Attributes:
        lr (float): Base learning rate.
        weight_decay (float): Decoupled weight decay.
        decay (float): Learning-rate factor applied every ``decay_every`` epochs.
        decay_every (int): Epochs between decays.
        epochs (int): Epoch budget used when no step count is given.
        batch_size (int): Shapes per step.
        beta1, beta2, eps: Adam constants.
    """
    model_config = ConfigDict(extra="forbid")

    lr: float = Field(2e-3, gt=0)
    weight_decay: float = Field(5e-4, ge=0)
    decay: float = Field(0.9, gt=0, le=1)
    decay_every: int = Field(20, ge=1)
    epochs: int = Field(250, ge=1)
    batch_size: int = Field(1, ge=1)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    eps: float = Field(1e-8, gt=0)

    def rate(self, epoch: int) -> float:
        return self.lr * self.decay ** (epoch // self.decay_every)


class ModelParams(BaseModel):
    """
    All learnable tensors, keyed by dotted name in declaration order.

    Attributes:
        config (ModelConfig): Shapes are fixed by this config.
        tensors (Dict[str, np.ndarray]): Name to float64 array.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: ModelConfig
    tensors: Dict[str, np.ndarray]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __iter__(self) -> Iterator[Tuple[str, np.ndarray]]:
        return iter(self.tensors.items())

    @property
    def names(self) -> List[str]:
        return list(self.tensors)

    @property
    def size(self) -> int:
        return int(sum(t.size for t in self.tensors.values()))

    def copy(self) -> "ModelParams":
        return ModelParams(config=self.config, tensors={k: v.copy() for k, v in self.tensors.items()})

    def zeros(self) -> Dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.tensors.items()}

    def flat(self) -> np.ndarray:
        return np.concatenate([t.ravel() for t in self.tensors.values()])

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(t)) for t in self.tensors.values())


class ForwardOutput(BaseModel):
    """
    One forward pass.

    Attributes:
        features (np.ndarray): U x d shape features.
        patches (np.ndarray): U x J x 3 completed points.
        proxies (np.ndarray): K x d contextualized proxies.
        probs (np.ndarray): K x type_count type distributions (null last).
        membership (np.ndarray): K x U membership matrix.
        coeffs (np.ndarray): K x 10 raw quadric coefficients.
        cache (Optional[Dict[str, Any]]): Intermediates for backward.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    features: np.ndarray
    patches: np.ndarray
    proxies: np.ndarray
    probs: np.ndarray
    membership: np.ndarray
    coeffs: np.ndarray
    cache: Optional[Dict[str, Any]] = None

    @property
    def completed(self) -> np.ndarray:
        return self.patches.reshape(-1, 3)


class OptimizerState(BaseModel):
    """AdamW first and second moments and the number of applied steps."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    step: int = 0
    m: Dict[str, np.ndarray]
    v: Dict[str, np.ndarray]

    @classmethod
    def fresh(cls, params: ModelParams) -> "OptimizerState":
        return cls(step=0, m=params.zeros(), v=params.zeros())
