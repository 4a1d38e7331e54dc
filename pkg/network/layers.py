"""
Module: layers
Building blocks of the model with hand-written backward passes.

Each ``*_forward`` returns ``(output, cache)``; the matching ``*_backward``
takes the upstream gradient and the cache, accumulates parameter gradients into
``grads`` under the layer's ``prefix`` and returns the input gradient(s).
"""
from typing import Dict, Tuple

import numpy as np

__all__ = ('linear_forward', 'linear_backward', 'mlp_forward', 'mlp_backward', 'layer_norm_forward',
           'layer_norm_backward', 'softmax', 'softmax_backward', 'attention_forward', 'attention_backward',
           'max_pool_forward', 'max_pool_backward', 'sigmoid_forward', 'sigmoid_backward', 'LN_EPS',
           'SIGMOID_CLIP')

Grads = Dict[str, np.ndarray]
Params = Dict[str, np.ndarray]

LN_EPS = 1e-5
# logits are clipped so sigmoid stays strictly inside (0, 1) in float64
SIGMOID_CLIP = 30.0


def _accumulate(grads: Grads, name: str, value: np.ndarray):
    grads[name] = grads[name] + value if name in grads else value


def linear_forward(x: np.ndarray, p: Params, prefix: str) -> Tuple[np.ndarray, dict]:
    return x @ p[prefix + ".w"] + p[prefix + ".b"], {"x": x}


def linear_backward(dy: np.ndarray, cache: dict, p: Params, prefix: str, grads: Grads) -> np.ndarray:
    _accumulate(grads, prefix + ".w", cache["x"].T @ dy)
    _accumulate(grads, prefix + ".b", dy.sum(axis=0))
    return dy @ p[prefix + ".w"].T


def mlp_forward(x: np.ndarray, p: Params, prefix: str) -> Tuple[np.ndarray, dict]:
    """Linear → ReLU → linear."""
    pre, first = linear_forward(x, p, prefix + ".fc1")
    hidden = np.maximum(pre, 0.0)
    out, second = linear_forward(hidden, p, prefix + ".fc2")
    return out, {"fc1": first, "fc2": second, "pre": pre}


def mlp_backward(dy: np.ndarray, cache: dict, p: Params, prefix: str, grads: Grads) -> np.ndarray:
    d_hidden = linear_backward(dy, cache["fc2"], p, prefix + ".fc2", grads)
    d_pre = d_hidden * (cache["pre"] > 0)
    return linear_backward(d_pre, cache["fc1"], p, prefix + ".fc1", grads)


def layer_norm_forward(x: np.ndarray, p: Params, prefix: str) -> Tuple[np.ndarray, dict]:
    mean = x.mean(axis=-1, keepdims=True)
    std = np.sqrt(x.var(axis=-1, keepdims=True) + LN_EPS)
    xhat = (x - mean) / std
    return xhat * p[prefix + ".gamma"] + p[prefix + ".beta"], {"xhat": xhat, "std": std}


def layer_norm_backward(dy: np.ndarray, cache: dict, p: Params, prefix: str, grads: Grads) -> np.ndarray:
    xhat, std = cache["xhat"], cache["std"]
    _accumulate(grads, prefix + ".gamma", (dy * xhat).sum(axis=0))
    _accumulate(grads, prefix + ".beta", dy.sum(axis=0))
    dxhat = dy * p[prefix + ".gamma"]
    return (dxhat - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)) / std


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(d_probs: np.ndarray, probs: np.ndarray) -> np.ndarray:
    return probs * (d_probs - (d_probs * probs).sum(axis=-1, keepdims=True))


def sigmoid_forward(logits: np.ndarray) -> Tuple[np.ndarray, dict]:
    clipped = np.clip(logits, -SIGMOID_CLIP, SIGMOID_CLIP)
    out = 1.0 / (1.0 + np.exp(-clipped))
    return out, {"out": out, "live": np.abs(logits) < SIGMOID_CLIP}


def sigmoid_backward(dy: np.ndarray, cache: dict) -> np.ndarray:
    out = cache["out"]
    return dy * out * (1.0 - out) * cache["live"]


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    n, d = x.shape
    return x.reshape(n, heads, d // heads).transpose(1, 0, 2)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    heads, n, dh = x.shape
    return x.transpose(1, 0, 2).reshape(n, heads * dh)


def attention_forward(queries: np.ndarray, context: np.ndarray, p: Params, prefix: str, heads: int,
                      scale: float = 1.0) -> Tuple[np.ndarray, dict]:
    """
    Multi-head scaled dot-product attention of ``queries`` (n x d) over ``context`` (m x d).

    ``scale`` multiplies the logits; 0 gives uniform attention.
    """
    q = _split_heads(queries @ p[prefix + ".wq"], heads)
    k = _split_heads(context @ p[prefix + ".wk"], heads)
    v = _split_heads(context @ p[prefix + ".wv"], heads)
    factor = scale / np.sqrt(q.shape[-1])
    weights = softmax(q @ k.transpose(0, 2, 1) * factor)
    merged = _merge_heads(weights @ v)
    out = merged @ p[prefix + ".wo"] + p[prefix + ".bo"]
    cache = {"queries": queries, "context": context, "q": q, "k": k, "v": v, "weights": weights,
             "merged": merged, "factor": factor, "heads": heads}
    return out, cache


def attention_backward(dy: np.ndarray, cache: dict, p: Params, prefix: str, grads: Grads) \
        -> Tuple[np.ndarray, np.ndarray]:
    """Returns the gradients w.r.t. ``queries`` and ``context``."""
    heads, factor = cache["heads"], cache["factor"]
    q, k, v, weights = cache["q"], cache["k"], cache["v"], cache["weights"]
    _accumulate(grads, prefix + ".wo", cache["merged"].T @ dy)
    _accumulate(grads, prefix + ".bo", dy.sum(axis=0))
    d_heads = _split_heads(dy @ p[prefix + ".wo"].T, heads)
    d_weights = d_heads @ v.transpose(0, 2, 1)
    d_v = weights.transpose(0, 2, 1) @ d_heads
    d_logits = softmax_backward(d_weights, weights) * factor
    d_q = _merge_heads(d_logits @ k)
    d_k = _merge_heads(d_logits.transpose(0, 2, 1) @ q)
    d_v = _merge_heads(d_v)
    _accumulate(grads, prefix + ".wq", cache["queries"].T @ d_q)
    _accumulate(grads, prefix + ".wk", cache["context"].T @ d_k)
    _accumulate(grads, prefix + ".wv", cache["context"].T @ d_v)
    d_queries = d_q @ p[prefix + ".wq"].T
    d_context = d_k @ p[prefix + ".wk"].T + d_v @ p[prefix + ".wv"].T
    return d_queries, d_context


def max_pool_forward(x: np.ndarray) -> Tuple[np.ndarray, dict]:
    """Column-wise maximum; the first row wins ties."""
    idx = np.argmax(x, axis=0)
    return x[idx, np.arange(x.shape[1])], {"idx": idx, "rows": x.shape[0]}


def max_pool_backward(dy: np.ndarray, cache: dict) -> np.ndarray:
    dx = np.zeros((cache["rows"], len(dy)))
    dx[cache["idx"], np.arange(len(dy))] = dy
    return dx
