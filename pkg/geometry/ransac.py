"""
Module: ransac
Primitive extraction from point clouds. Defines the extractor interface and a
sequential greedy RANSAC implementation used as the extraction baseline.
"""
import abc
import warnings
from typing import List, Optional, Tuple

import numpy as np

from geometry.errors import GeometryError, RankDeficient
from geometry.fitting import fit_quadric
from geometry.quadric import distances
from geometry.schemas import BoundedPrimitive, PrimitiveType, Quadric, RansacConfig
from logs.project_log import main_logger

__all__ = ('PrimitiveExtractor', 'RansacExtractor', 'ransac_extract', 'MINIMAL_SET')

MINIMAL_SET = {
    PrimitiveType.PLANE: 3,
    PrimitiveType.SPHERE: 4,
    PrimitiveType.CYLINDER: 9,
    PrimitiveType.CONE: 9,
}


class PrimitiveExtractor(abc.ABC):
    """
    Abstract base class for primitive extractors.

    Concrete implementations turn an unstructured point set into bounded primitives.
    """

    @abc.abstractmethod
    def extract(self, points: np.ndarray) -> List[BoundedPrimitive]:
        """
        Extracts primitives from ``points``.

        Args:
            points (np.ndarray): N x 3 points.

        Returns:
            List[BoundedPrimitive]: Primitives with their inlier support.
        """


class RansacExtractor(PrimitiveExtractor):
    """
    Sequential greedy RANSAC: per round, draw minimal sets for every candidate
    type, keep the candidate with most inliers, refit on its inliers, accept it if
    supported, remove the inliers and repeat.

    Attributes:
        cfg (RansacConfig): Thresholds, iteration budget and seed.
    """

    def __init__(self, cfg: Optional[RansacConfig] = None):
        self.cfg = cfg or RansacConfig()
        main_logger.debug("RansacExtractor initialized with %s", self.cfg)

    def _fit(self, sample: np.ndarray, type_tag: PrimitiveType) -> Optional[Quadric]:
        with warnings.catch_warnings():
            warnings.simplefilter("error", RankDeficient)
            try:
                return fit_quadric(sample, constrain=type_tag)
            except (GeometryError, RankDeficient, np.linalg.LinAlgError, ValueError):
                return None

    def _inliers(self, q: Quadric, points: np.ndarray) -> np.ndarray:
        return distances(q, points) < self.cfg.epsilon

    def _best_candidate(self, points: np.ndarray, rng: np.random.Generator) \
            -> Tuple[Optional[Quadric], Optional[np.ndarray]]:
        best_q, best_mask, best_count = None, None, 0
        for _ in range(self.cfg.iterations):
            for type_tag in self.cfg.types:
                size = MINIMAL_SET[type_tag]
                if len(points) < size:
                    continue
                sample = points[rng.choice(len(points), size=size, replace=False)]
                q = self._fit(sample, type_tag)
                if q is None:
                    continue
                mask = self._inliers(q, points)
                count = int(mask.sum())
                # strict improvement keeps the earlier (preferred) type on ties
                if count > best_count:
                    best_q, best_mask, best_count = q, mask, count
        return best_q, best_mask

    def extract(self, points: np.ndarray) -> List[BoundedPrimitive]:
        remaining = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        rng = np.random.default_rng(self.cfg.seed)
        found: List[BoundedPrimitive] = []
        while len(remaining) >= self.cfg.min_support and len(found) < self.cfg.max_primitives:
            q, mask = self._best_candidate(remaining, rng)
            if q is None or mask.sum() < self.cfg.min_support:
                break
            refit = self._fit(remaining[mask], q.type_tag)
            if refit is not None:
                refit_mask = self._inliers(refit, remaining)
                if refit_mask.sum() >= mask.sum():
                    q, mask = refit, refit_mask
            found.append(BoundedPrimitive(quadric=q, support=remaining[mask]))
            main_logger.debug("RANSAC accepted %s with %d inliers", q.type_tag.value, int(mask.sum()))
            remaining = remaining[~mask]
        main_logger.info("RANSAC extracted %d primitives, %d points unexplained", len(found), len(remaining))
        return found


def ransac_extract(points: np.ndarray, cfg: Optional[RansacConfig] = None) -> List[BoundedPrimitive]:
    """Runs ``RansacExtractor(cfg)`` on ``points``."""
    return RansacExtractor(cfg).extract(points)
