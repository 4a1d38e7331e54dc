"""
Module: optimizer
AdamW with decoupled weight decay and step learning-rate decay.
"""
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from network.schemas import ModelParams, OptimizerConfig, OptimizerState

__all__ = ('adamw_update',)


def adamw_update(params: ModelParams, grads: Dict[str, np.ndarray], state: OptimizerState,
                 cfg: OptimizerConfig, epoch: int, trainable: Optional[Iterable[str]] = None) \
        -> Tuple[ModelParams, OptimizerState]:
    """
    Applies one AdamW step at the learning rate of ``epoch``.

    Args:
        params (ModelParams): Current parameters (left untouched).
        grads (Dict[str, np.ndarray]): Gradient per parameter name.
        state (OptimizerState): Moments and step counter (left untouched).
        cfg (OptimizerConfig): Rates and constants.
        epoch (int): Selects lr · decay^(epoch // decay_every).
        trainable (Optional[Iterable[str]]): Names to update; all when omitted.
            Frozen tensors keep their value and moments.

    Returns:
        Tuple[ModelParams, OptimizerState]: The updated copies.
    """
    names = set(params.names if trainable is None else trainable)
    step = state.step + 1
    lr = cfg.rate(epoch)
    bias1, bias2 = 1.0 - cfg.beta1 ** step, 1.0 - cfg.beta2 ** step
    tensors, m, v = {}, {}, {}
    for name, value in params:
        if name not in names:
            tensors[name], m[name], v[name] = value.copy(), state.m[name].copy(), state.v[name].copy()
            continue
        g = grads[name]
        m[name] = cfg.beta1 * state.m[name] + (1.0 - cfg.beta1) * g
        v[name] = cfg.beta2 * state.v[name] + (1.0 - cfg.beta2) * g * g
        update = (m[name] / bias1) / (np.sqrt(v[name] / bias2) + cfg.eps)
        tensors[name] = value - lr * (update + cfg.weight_decay * value)
    return ModelParams(config=params.config, tensors=tensors), OptimizerState(step=step, m=m, v=v)
