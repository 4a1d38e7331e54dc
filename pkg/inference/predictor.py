"""
Module: predictor
Checkpoint-backed inference shared by the command line and the HTTP service.
"""
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from inference.schemas import CandidateSet, InferenceConfig, PrimitiveRecord
from inference.export import to_records
from inference.selection import build_candidates, refine_project, select
from logs.project_log import main_logger
from network.checkpoint import load_checkpoint
from network.model import forward
from network.schemas import ModelParams

__all__ = ('Predictor',)


class Predictor:
    """
    Runs the model on partial scans and returns the selected primitives.

    Attributes:
        params (ModelParams): Trained parameters.
        cfg (InferenceConfig): Default threshold, projection and quadric source.
    """

    def __init__(self, params: ModelParams, cfg: Optional[InferenceConfig] = None):
        self.params = params
        self.cfg = cfg or InferenceConfig()

    @classmethod
    def from_checkpoint(cls, path: Union[str, Path], cfg: Optional[InferenceConfig] = None) -> "Predictor":
        """
        Loads parameters from ``path``; the optimizer state is discarded.

        Raises:
            CheckpointError: The file is not a valid checkpoint.
        """
        params, _ = load_checkpoint(path)
        main_logger.info("Predictor loaded %s (%d parameters)", path, params.size)
        return cls(params, cfg)

    def _options(self, threshold: Optional[float], project: Optional[bool]) -> InferenceConfig:
        update = {}
        if threshold is not None:
            update["threshold"] = threshold
        if project is not None:
            update["project"] = project
        return InferenceConfig(**{**self.cfg.model_dump(), **update})

    def candidates(self, points: np.ndarray) -> CandidateSet:
        """All K scored candidates for one scan."""
        return build_candidates(forward(points, self.params), self.cfg.source)

    def predict(self, points: np.ndarray, threshold: Optional[float] = None,
                project: Optional[bool] = None) -> CandidateSet:
        """
        Selected (and optionally projected) candidates for one scan.

        Args:
            points (np.ndarray): M x 3 partial scan.
            threshold (Optional[float]): Overrides the configured threshold.
            project (Optional[bool]): Overrides the configured projection.

        Returns:
            CandidateSet: Retained candidates in proxy order.
        """
        options = self._options(threshold, project)
        selected = select(self.candidates(points), options.threshold)
        if options.project:
            selected = CandidateSet(candidates=[refine_project(c) for c in selected])
        main_logger.info("retained %d primitives at threshold %.2f", len(selected), options.threshold)
        return selected

    def records(self, points: np.ndarray, threshold: Optional[float] = None,
                project: Optional[bool] = None) -> List[PrimitiveRecord]:
        """Export records for one scan."""
        return to_records(self.predict(points, threshold, project), self.cfg.include_points)
