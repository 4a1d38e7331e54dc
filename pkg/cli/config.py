"""
Module: config
Run configuration for the command line, loaded from JSON.

Unknown keys are rejected at every level. The ``desk`` preset (default) is
small enough to train on a laptop CPU; ``full`` carries the full-scale
architecture and schedule.
"""
import hashlib
import json
from pathlib import Path
from typing import Union

from pydantic import BaseModel, ConfigDict, Field

from assignment.schemas import CostWeights
from geometry.schemas import RansacConfig
from inference.schemas import InferenceConfig
from metrics.schemas import EvalConfig
from network.schemas import ModelConfig, OptimizerConfig
from scene.schemas import ShapeSpec

__all__ = ('DataConfig', 'RunConfig', 'load_run_config', 'config_hash', 'PRESETS')


class DataConfig(BaseModel):
    """
    Synthetic data settings.

    Attributes:
        spec (ShapeSpec): Generator parameters.
        ratio (float): Incompleteness ratio of the partial scans.
        sigma (float): Noise level as a fraction of the unit-cube diagonal.
        partial_points (int): Points per partial scan after downsampling.
    """
    model_config = ConfigDict(extra="forbid")

    spec: ShapeSpec = Field(default_factory=lambda: ShapeSpec(point_count=1024))
    ratio: float = Field(0.5, ge=0.0, lt=1.0)
    sigma: float = Field(0.0, ge=0.0)
    partial_points: int = Field(256, ge=16)


class RunConfig(BaseModel):
    """
    Everything one run depends on.

    Attributes:
        model (ModelConfig): Architecture.
        weights (CostWeights): Matching and loss weights.
        optimizer (OptimizerConfig): AdamW and schedule.
        data (DataConfig): Synthetic data.
        inference (InferenceConfig): Threshold, projection and quadric source.
        evaluation (EvalConfig): Metric sampling and tolerances.
        ransac (RansacConfig): Baseline extractor.
        two_stage (int): Point-pathway-only steps before primitive-only training; 0 trains jointly.
        static_targets (bool): Induce training targets once per shape instead of every step.
        seed (int): Drives crops, noise and batching.
    """
    model_config = ConfigDict(extra="forbid")

    model: ModelConfig = Field(default_factory=ModelConfig.desk)
    weights: CostWeights = Field(default_factory=CostWeights)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    inference: InferenceConfig = Field(default_factory=InferenceConfig)
    evaluation: EvalConfig = Field(default_factory=EvalConfig)
    ransac: RansacConfig = Field(default_factory=RansacConfig)
    two_stage: int = Field(0, ge=0)
    static_targets: bool = False
    seed: int = 0

    @classmethod
    def desk(cls) -> "RunConfig":
        return cls()

    @classmethod
    def full(cls) -> "RunConfig":
        return cls(model=ModelConfig.full(), optimizer=OptimizerConfig(),
                   data=DataConfig(spec=ShapeSpec(), partial_points=2048))


PRESETS = {"desk": RunConfig.desk, "full": RunConfig.full}


def load_run_config(path: Union[str, Path, None] = None, preset: str = "desk") -> RunConfig:
    """
    Reads a run config; keys missing from the file take the preset's values.

    Raises:
        OSError: The file cannot be read.
        pydantic.ValidationError: Unknown keys or invalid values.
    """
    base = PRESETS[preset]()
    if path is None:
        return base
    overrides = json.loads(Path(path).read_text(encoding="utf-8"))
    merged = base.model_dump(mode="json", by_alias=True)
    for key, value in overrides.items():
        # sections merge key by key; values inside a section replace the preset's wholesale
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = {**merged[key], **value}
        else:
            merged[key] = value
    return RunConfig.model_validate(merged)


def config_hash(model: BaseModel) -> str:
    """SHA-256 of the canonical JSON form of ``model``."""
    payload = json.dumps(model.model_dump(mode="json", by_alias=True), sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()
