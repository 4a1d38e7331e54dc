"""
Module: model
Two-pathway model: a shared encoder feeding a point decoder (completed patches)
and a primitive pathway (proxy contextualization and three heads).

encode:        per-point MLP → max-pool → U patch queries attend over the points
decode_points: per-feature centre + J offsets
contextualize: proxies R⁽⁰⁾ → [cross-attn, self-attn, FFN] × layers (pre-norm residual)
heads:         type softmax, membership sigmoid(⟨MLP(r), MLP(t)⟩), ten quadric coefficients
"""
from typing import Dict, Optional, Tuple

import numpy as np

from assignment.schemas import MEMBERSHIP_THRESHOLD, OutputGradients
from geometry.schemas import QUADRATIC_INDICES
from network.errors import CacheMissing
from network.layers import (attention_backward, attention_forward, layer_norm_backward, layer_norm_forward,
                            linear_backward, linear_forward, max_pool_backward, max_pool_forward, mlp_backward,
                            mlp_forward, sigmoid_backward, sigmoid_forward, softmax, softmax_backward)
from network.schemas import MIN_INPUT_POINTS, ForwardOutput, ModelConfig, ModelParams

__all__ = ('init_params', 'encode', 'decode_points', 'contextualize', 'heads', 'forward', 'backward',
           'inlier_sets', 'geometry_mask', 'layer_groups')

Grads = Dict[str, np.ndarray]


def _declare(cfg: ModelConfig) -> Dict[str, Tuple[Tuple[int, ...], str]]:
    """Parameter names, shapes and init kind ("w", "b", "one", "embed") in declaration order."""
    d, u, k = cfg.width, cfg.patches, cfg.proxies
    spec: Dict[str, Tuple[Tuple[int, ...], str]] = {}

    def linear(prefix: str, n_in: int, n_out: int):
        spec[prefix + ".w"] = ((n_in, n_out), "w")
        spec[prefix + ".b"] = ((n_out,), "b")

    def mlp(prefix: str, n_in: int, hidden: int, n_out: int):
        linear(prefix + ".fc1", n_in, hidden)
        linear(prefix + ".fc2", hidden, n_out)

    def norm(prefix: str):
        spec[prefix + ".gamma"] = ((d,), "one")
        spec[prefix + ".beta"] = ((d,), "b")

    def attention(prefix: str):
        for name in ("wq", "wk", "wv", "wo"):
            spec[f"{prefix}.{name}"] = ((d, d), "w")
        spec[prefix + ".bo"] = ((d,), "b")

    mlp("encoder.point_mlp", 3, d, d)
    spec["encoder.queries"] = ((u, d), "embed")
    attention("encoder.attention")
    norm("encoder.norm")
    linear("points.center", d, 3)
    mlp("points.offsets", d, d, 3 * cfg.patch_size)
    mlp("memory", d, d, d)
    spec["decoder.proxies"] = ((k, d), "embed")
    for layer in range(cfg.layers):
        prefix = f"decoder.{layer}"
        norm(prefix + ".norm_cross")
        attention(prefix + ".cross")
        norm(prefix + ".norm_self")
        attention(prefix + ".self")
        norm(prefix + ".norm_ffn")
        mlp(prefix + ".ffn", d, 2 * d, d)
    norm("decoder.norm")
    mlp("heads.semantic", d, d, cfg.type_count)
    mlp("heads.member_proxy", d, d, d)
    mlp("heads.member_feature", d, d, d)
    mlp("heads.geometry", d, d, 10)
    return spec


def init_params(cfg: ModelConfig) -> ModelParams:
    """Seeded initialization: weights N(0, 1/fan_in), biases 0, norm gains 1, embeddings N(0, 1)."""
    rng = np.random.default_rng(cfg.seed)
    tensors = {}
    for name, (shape, kind) in _declare(cfg).items():
        if kind == "w":
            tensors[name] = rng.normal(0.0, 1.0 / np.sqrt(shape[0]), size=shape)
        elif kind == "embed":
            tensors[name] = rng.normal(0.0, 1.0, size=shape)
        elif kind == "one":
            tensors[name] = np.ones(shape)
        else:
            tensors[name] = np.zeros(shape)
    return ModelParams(config=cfg, tensors=tensors)


def layer_groups(params: ModelParams) -> Dict[str, list]:
    """Parameter names grouped by layer, e.g. ``decoder.0.ffn`` or ``encoder.queries``."""
    groups: Dict[str, list] = {}
    for name in params.names:
        parts = name.split(".")
        if parts[-1] in ("queries", "proxies"):
            key = name
        elif parts[-1] in ("w", "b") and parts[-2].startswith("fc"):
            key = ".".join(parts[:-2])
        else:
            key = ".".join(parts[:-1])
        groups.setdefault(key, []).append(name)
    return groups


def geometry_mask(cfg: ModelConfig) -> np.ndarray:
    """1 for emitted coefficients; the plane-only variant zeroes the quadratic block."""
    mask = np.ones(10)
    if cfg.plane_only:
        mask[list(QUADRATIC_INDICES)] = 0.0
    return mask


def encode(points: np.ndarray, params: ModelParams, attention_scale: float = 1.0) -> Tuple[np.ndarray, dict]:
    """
    Shape features T (U x d) from an M x 3 partial scan.

    Points are sorted lexicographically first so every reduction runs in a fixed
    order and the result does not depend on the input order.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) < MIN_INPUT_POINTS:
        raise ValueError(f"encode needs at least {MIN_INPUT_POINTS} points, got {len(pts)}")
    pts = pts[np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0]))]
    p, cfg = params.tensors, params.config
    point_features, mlp_cache = mlp_forward(pts, p, "encoder.point_mlp")
    pooled, pool_cache = max_pool_forward(point_features)
    queries = p["encoder.queries"] + pooled
    attended, attn_cache = attention_forward(queries, point_features, p, "encoder.attention", cfg.heads,
                                             attention_scale)
    features, norm_cache = layer_norm_forward(queries + attended, p, "encoder.norm")
    return features, {"mlp": mlp_cache, "pool": pool_cache, "attention": attn_cache, "norm": norm_cache}


def _encode_backward(d_features: np.ndarray, cache: dict, p: dict, grads: Grads):
    d_sum = layer_norm_backward(d_features, cache["norm"], p, "encoder.norm", grads)
    d_queries, d_points = attention_backward(d_sum, cache["attention"], p, "encoder.attention", grads)
    d_queries = d_queries + d_sum
    grads["encoder.queries"] = grads.get("encoder.queries", 0.0) + d_queries
    d_points = d_points + max_pool_backward(d_queries.sum(axis=0), cache["pool"])
    mlp_backward(d_points, cache["mlp"], p, "encoder.point_mlp", grads)


def decode_points(features: np.ndarray, params: ModelParams) -> Tuple[np.ndarray, dict]:
    """Patch u = centre(t^u) + offsets(t^u); every patch depends on its own feature only."""
    p, cfg = params.tensors, params.config
    center, center_cache = linear_forward(features, p, "points.center")
    offsets, offset_cache = mlp_forward(features, p, "points.offsets")
    patches = center[:, None, :] + offsets.reshape(len(features), cfg.patch_size, 3)
    return patches, {"center": center_cache, "offsets": offset_cache}


def _decode_backward(d_patches: np.ndarray, cache: dict, p: dict, grads: Grads) -> np.ndarray:
    d_features = linear_backward(d_patches.sum(axis=1), cache["center"], p, "points.center", grads)
    d_offsets = d_patches.reshape(len(d_patches), -1)
    return d_features + mlp_backward(d_offsets, cache["offsets"], p, "points.offsets", grads)


def contextualize(features: np.ndarray, params: ModelParams, attention_scale: float = 1.0) \
        -> Tuple[np.ndarray, dict]:
    """Proxies 𝓡 (K x d) attending to MLP(T)."""
    p, cfg = params.tensors, params.config
    memory, memory_cache = mlp_forward(features, p, "memory")
    proxies = p["decoder.proxies"]
    blocks = []
    for layer in range(cfg.layers):
        prefix = f"decoder.{layer}"
        block = {}
        normed, block["norm_cross"] = layer_norm_forward(proxies, p, prefix + ".norm_cross")
        message, block["cross"] = attention_forward(normed, memory, p, prefix + ".cross", cfg.heads,
                                                    attention_scale)
        proxies = proxies + message
        normed, block["norm_self"] = layer_norm_forward(proxies, p, prefix + ".norm_self")
        message, block["self"] = attention_forward(normed, normed, p, prefix + ".self", cfg.heads,
                                                   attention_scale)
        proxies = proxies + message
        normed, block["norm_ffn"] = layer_norm_forward(proxies, p, prefix + ".norm_ffn")
        message, block["ffn"] = mlp_forward(normed, p, prefix + ".ffn")
        proxies = proxies + message
        blocks.append(block)
    out, norm_cache = layer_norm_forward(proxies, p, "decoder.norm")
    return out, {"memory": memory_cache, "blocks": blocks, "norm": norm_cache}


def _contextualize_backward(d_out: np.ndarray, cache: dict, p: dict, grads: Grads, layers: int) -> np.ndarray:
    d_proxies = layer_norm_backward(d_out, cache["norm"], p, "decoder.norm", grads)
    d_memory = 0.0
    for layer in reversed(range(layers)):
        prefix, block = f"decoder.{layer}", cache["blocks"][layer]
        d_normed = mlp_backward(d_proxies, block["ffn"], p, prefix + ".ffn", grads)
        d_proxies = d_proxies + layer_norm_backward(d_normed, block["norm_ffn"], p, prefix + ".norm_ffn", grads)
        d_q, d_kv = attention_backward(d_proxies, block["self"], p, prefix + ".self", grads)
        d_proxies = d_proxies + layer_norm_backward(d_q + d_kv, block["norm_self"], p, prefix + ".norm_self",
                                                    grads)
        d_q, d_kv = attention_backward(d_proxies, block["cross"], p, prefix + ".cross", grads)
        d_memory = d_memory + d_kv
        d_proxies = d_proxies + layer_norm_backward(d_q, block["norm_cross"], p, prefix + ".norm_cross", grads)
    grads["decoder.proxies"] = grads.get("decoder.proxies", 0.0) + d_proxies
    return mlp_backward(d_memory, cache["memory"], p, "memory", grads)


def heads(proxies: np.ndarray, features: np.ndarray, params: ModelParams) \
        -> Tuple[np.ndarray, np.ndarray, np.ndarray, dict]:
    """
    Type distributions (K x C), membership matrix (K x U) and raw quadric coefficients (K x 10).
    """
    p, cfg = params.tensors, params.config
    logits, semantic_cache = mlp_forward(proxies, p, "heads.semantic")
    probs = softmax(logits)
    proxy_embed, proxy_cache = mlp_forward(proxies, p, "heads.member_proxy")
    feature_embed, feature_cache = mlp_forward(features, p, "heads.member_feature")
    scale = 1.0 / np.sqrt(cfg.width)
    membership, sigmoid_cache = sigmoid_forward(proxy_embed @ feature_embed.T * scale)
    raw, geometry_cache = mlp_forward(proxies, p, "heads.geometry")
    coeffs = raw * geometry_mask(cfg)
    cache = {"semantic": semantic_cache, "probs": probs, "proxy": proxy_cache, "feature": feature_cache,
             "proxy_embed": proxy_embed, "feature_embed": feature_embed, "scale": scale,
             "sigmoid": sigmoid_cache, "geometry": geometry_cache}
    return probs, membership, coeffs, cache


def _heads_backward(upstream: OutputGradients, cache: dict, p: dict, grads: Grads, cfg: ModelConfig) \
        -> Tuple[np.ndarray, np.ndarray]:
    d_logits = softmax_backward(upstream.d_probs, cache["probs"])
    d_proxies = mlp_backward(d_logits, cache["semantic"], p, "heads.semantic", grads)

    d_scores = sigmoid_backward(upstream.d_membership, cache["sigmoid"]) * cache["scale"]
    d_proxy_embed = d_scores @ cache["feature_embed"]
    d_feature_embed = d_scores.T @ cache["proxy_embed"]
    d_proxies = d_proxies + mlp_backward(d_proxy_embed, cache["proxy"], p, "heads.member_proxy", grads)
    d_features = mlp_backward(d_feature_embed, cache["feature"], p, "heads.member_feature", grads)

    d_raw = upstream.d_coeffs * geometry_mask(cfg)
    d_proxies = d_proxies + mlp_backward(d_raw, cache["geometry"], p, "heads.geometry", grads)
    return d_proxies, d_features


def forward(points: np.ndarray, params: ModelParams, attention_scale: float = 1.0) -> ForwardOutput:
    """Runs both pathways on one partial scan and keeps the cache for ``backward``."""
    features, encode_cache = encode(points, params, attention_scale)
    patches, decode_cache = decode_points(features, params)
    proxies, context_cache = contextualize(features, params, attention_scale)
    probs, membership, coeffs, head_cache = heads(proxies, features, params)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9, rtol=0.0)
    assert np.all((membership > 0.0) & (membership < 1.0))
    return ForwardOutput(
        features=features, patches=patches, proxies=proxies, probs=probs, membership=membership, coeffs=coeffs,
        cache={"encode": encode_cache, "decode": decode_cache, "context": context_cache, "heads": head_cache},
    )


def backward(output: ForwardOutput, upstream: OutputGradients, params: ModelParams,
             corrupt: Optional[str] = None) -> Dict[str, np.ndarray]:
    """
    Gradients of a scalar loss w.r.t. every parameter, given its gradients w.r.t. the outputs.

    Args:
        output (ForwardOutput): Result of ``forward`` with its cache.
        upstream (OutputGradients): dL/d(probs, membership, coeffs, patches).
        params (ModelParams): The parameters used by ``forward``.
        corrupt (Optional[str]): Test hook; gradients of the named layer are scaled by 1.5.

    Returns:
        Dict[str, np.ndarray]: One gradient per parameter, in declaration order.

    Raises:
        CacheMissing: ``output`` carries no forward cache.
    """
    if not output.cache:
        raise CacheMissing("forward cache is missing; run forward() before backward()")
    p, cfg, cache = params.tensors, params.config, output.cache
    grads: Grads = {}
    d_proxies, d_features = _heads_backward(upstream, cache["heads"], p, grads, cfg)
    d_features = d_features + _contextualize_backward(d_proxies, cache["context"], p, grads, cfg.layers)
    d_features = d_features + _decode_backward(upstream.d_patches, cache["decode"], p, grads)
    _encode_backward(d_features, cache["encode"], p, grads)

    ordered = {}
    groups = layer_groups(params) if corrupt else {}
    corrupted = set(groups.get(corrupt, []))
    for name, value in params:
        g = np.array(grads.get(name, np.zeros_like(value)), dtype=np.float64).reshape(value.shape)
        ordered[name] = g * 1.5 if name in corrupted else g
    return ordered


def inlier_sets(membership_row) -> frozenset:
    """Patches with membership ≥ 0.5 (boundary inclusive)."""
    row = np.asarray(membership_row, dtype=np.float64)
    return frozenset(int(u) for u in np.flatnonzero(row >= MEMBERSHIP_THRESHOLD))
