"""Module with all needed FastAPI dependencies"""
from functools import lru_cache

from fastapi import HTTPException

from inference.predictor import Predictor
from inference.schemas import InferenceConfig
from logs.project_log import main_logger
from network.errors import CheckpointError
from settings import settings


@lru_cache(maxsize=4)
def _load(path: str, threshold: float) -> Predictor:
    main_logger.info("Loading checkpoint %s", path)
    return Predictor.from_checkpoint(path, InferenceConfig(threshold=threshold))


def get_predictor() -> Predictor:
    """
    Provides the predictor for the checkpoint named by ``UNICO_CHECKPOINT``.

    The loaded model is cached, so the checkpoint is read once per path.

    Returns:
        Predictor: Ready-to-use predictor.

    Raises:
        HTTPException: 503 when no checkpoint is configured or it cannot be loaded.
    """
    if not settings.checkpoint:
        raise HTTPException(status_code=503, detail="No checkpoint configured (UNICO_CHECKPOINT)")
    try:
        return _load(settings.checkpoint, settings.default_threshold)
    except (OSError, CheckpointError) as e:
        main_logger.error("Cannot load checkpoint %s: %s", settings.checkpoint, e)
        raise HTTPException(status_code=503, detail="Checkpoint could not be loaded") from e
