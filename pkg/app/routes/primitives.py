"""Module with primitives router"""
import traceback

import numpy as np
from fastapi import APIRouter, Depends, HTTPException

from app.dependencies import get_predictor
from app.schemas import InferRequest, InferResponse, ModelInfo
from assignment.errors import AssignmentError
from geometry.errors import GeometryError
from inference.errors import InferenceError
from inference.predictor import Predictor
from logs.project_log import main_logger

router = APIRouter()

_DOMAIN_ERRORS = (GeometryError, AssignmentError, InferenceError, ValueError)


@router.get("/model", response_model=ModelInfo)
async def get_model(predictor: Predictor = Depends(get_predictor)):
    """
    Describe the loaded model.

    Args:
        predictor (Predictor): Dependency-injected predictor.

    Returns:
        ModelInfo: Architecture, parameter count and default threshold.
    """
    return ModelInfo(config=predictor.params.config, parameters=predictor.params.size,
                     threshold=predictor.cfg.threshold)


@router.post("/primitives/infer", response_model=InferResponse, response_model_exclude_none=True)
def infer_primitives(body: InferRequest, predictor: Predictor = Depends(get_predictor)):
    """
    Predict the primitives of a partial scan.

    Args:
        body (InferRequest): Scan points and options.
        predictor (Predictor): Dependency-injected predictor.

    Returns:
        InferResponse: The selected primitives in export format.
    """
    try:
        main_logger.info("Inferring primitives for %d points.", len(body.points))
        records = predictor.records(np.asarray(body.points, dtype=np.float64), body.threshold, body.project)
        return InferResponse(primitives=records)
    except _DOMAIN_ERRORS as e:
        main_logger.warning("Rejected scan: %s", e)
        raise HTTPException(status_code=422, detail=str(e)) from e
    except Exception as e:
        main_logger.error("Error inferring primitives: %s", traceback.format_exc())
        raise HTTPException(status_code=500, detail="Internal server error") from e
