"""
Module: checkpoint
Binary checkpoint format.

    UNICO1\\n
    {"config": {...}, "optimizer": bool, "step": n}\\n
    float64 LE payload: parameters in declaration order (+ AdamW m, v when "optimizer")
    uint64 LE count of payload values
"""
import json
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError

from logs.project_log import main_logger
from network.errors import CheckpointError
from network.model import init_params
from network.schemas import ModelConfig, ModelParams, OptimizerState

__all__ = ('save_checkpoint', 'load_checkpoint', 'CHECKPOINT_MAGIC')

CHECKPOINT_MAGIC = b"UNICO1"
PathLike = Union[str, Path]


def save_checkpoint(path: PathLike, params: ModelParams, state: Optional[OptimizerState] = None):
    """Writes ``params`` (and the optimizer moments when ``state`` is given)."""
    header = {"config": params.config.model_dump(), "step": state.step if state else 0,
              "optimizer": state is not None}
    chunks = [params.flat()]
    if state is not None:
        chunks += [np.concatenate([state.m[name].ravel() for name in params.names]),
                   np.concatenate([state.v[name].ravel() for name in params.names])]
    payload = np.concatenate(chunks).astype("<f8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC + b"\n")
        f.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        f.write(payload.tobytes())
        f.write(np.array([payload.size], dtype="<u8").tobytes())
    main_logger.debug("saved checkpoint %s (%d values)", path, payload.size)


def _unflatten(template: ModelParams, values: np.ndarray) -> dict:
    out, offset = {}, 0
    for name, tensor in template:
        out[name] = values[offset:offset + tensor.size].reshape(tensor.shape).copy()
        offset += tensor.size
    return out


def load_checkpoint(path: PathLike) -> Tuple[ModelParams, Optional[OptimizerState]]:
    """
    Reads a checkpoint written by ``save_checkpoint``.

    Raises:
        CheckpointError: Bad magic, header, length or non-finite values.
    """
    with open(path, "rb") as f:
        blob = f.read()
    first = blob.find(b"\n")
    if first < 0 or blob[:first] != CHECKPOINT_MAGIC:
        raise CheckpointError("missing UNICO1 magic")
    second = blob.find(b"\n", first + 1)
    if second < 0:
        raise CheckpointError("missing header line")
    try:
        header = json.loads(blob[first + 1:second].decode("utf-8"))
        config = ModelConfig(**header["config"])
        step, has_optimizer = int(header["step"]), bool(header["optimizer"])
    except (ValueError, KeyError, TypeError, ValidationError) as exc:
        raise CheckpointError(f"bad header: {exc}") from None

    body = blob[second + 1:]
    if len(body) < 8 or (len(body) - 8) % 8:
        raise CheckpointError("truncated payload")
    values = np.frombuffer(body[:-8], dtype="<f8").astype(np.float64)
    count = int(np.frombuffer(body[-8:], dtype="<u8")[0])
    template = init_params(config)
    expected = template.size * (3 if has_optimizer else 1)
    if count != values.size or count != expected:
        raise CheckpointError(f"length check failed: trailer {count}, payload {values.size}, expected {expected}")
    if not np.all(np.isfinite(values)):
        raise CheckpointError("checkpoint holds non-finite values")

    size = template.size
    params = ModelParams(config=config, tensors=_unflatten(template, values[:size]))
    state = None
    if has_optimizer:
        state = OptimizerState(step=step, m=_unflatten(template, values[size:2 * size]),
                               v=_unflatten(template, values[2 * size:]))
    return params, state
