"""Grouped transformer encoders with intra-group weight sharing.

Every spatial site of a ``C_t x G x G`` map is one token (patch side 1).
A group owns exactly one ``EncoderGroupParams``; its three feature maps are
encoded by that same object, so sharing is by identity rather than by copy.
"""
from __future__ import annotations

import numpy as np

from . import tensor as T
from .nn import LayerNorm, Linear, Module, uniform
from .tensor import ShapeError, Tensor


class LayerParams(Module):
    def __init__(self, rng: np.random.Generator, dim: int, heads: int, hidden: int):
        if dim % heads:
            raise ValueError(f"embedding width {dim} not divisible by {heads} heads")
        self.heads = heads
        self.ln1 = LayerNorm(dim)
        self.q = Linear(rng, dim, dim)
        self.k = Linear(rng, dim, dim)
        self.v = Linear(rng, dim, dim)
        self.proj = Linear(rng, dim, dim)
        self.ln2 = LayerNorm(dim)
        self.fc1 = Linear(rng, dim, hidden)
        self.fc2 = Linear(rng, hidden, dim)


class EncoderGroupParams(Module):
    def __init__(self, rng: np.random.Generator, channels: int, grid: int, dim: int = 32,
                 heads: int = 4, layers: int = 2, mlp_ratio: int = 4):
        self.channels = channels
        self.grid = grid
        self.embed = Linear(rng, channels, dim, bias=False)
        self.pos = uniform(rng, (grid * grid, dim), 0.02)
        self.layers = [LayerParams(rng, dim, heads, mlp_ratio * dim) for _ in range(layers)]
        self.out = Linear(rng, dim, channels)


def encoder_param_count(channels: int, grid: int, dim: int, layers: int, mlp_ratio: int = 4) -> int:
    hidden = mlp_ratio * dim
    per_layer = 2 * (2 * dim) + 4 * (dim * dim + dim) + (dim * hidden + hidden) + (hidden * dim + dim)
    return channels * dim + grid * grid * dim + layers * per_layer + dim * channels + channels


def tokenize(x: Tensor, params: EncoderGroupParams) -> Tensor:
    """N_b x C x G x G map -> N_b x G^2 x D tokens (row-major sites) plus positional table."""
    n, c, h, w = x.shape
    if (h, w) != (params.grid, params.grid) or c != params.channels:
        raise ShapeError(f"tokenize: expected N x {params.channels} x {params.grid} x {params.grid}, "
                         f"got {x.shape}")
    seq = T.transpose(T.reshape(x, (n, c, h * w)), (0, 2, 1))
    tokens = params.embed(seq)
    pos = T.expand(T.reshape(params.pos, (1,) + params.pos.shape), tokens.shape)
    return tokens + pos


def _split_heads(z: Tensor, heads: int) -> Tensor:
    n, t, d = z.shape
    return T.transpose(T.reshape(z, (n, t, heads, d // heads)), (0, 2, 1, 3))


def attention(z: Tensor, lp: LayerParams, return_weights: bool = False):
    n, t, d = z.shape
    hd = d // lp.heads
    q = _split_heads(lp.q(z), lp.heads)
    k = _split_heads(lp.k(z), lp.heads)
    v = _split_heads(lp.v(z), lp.heads)
    scores = T.scale(T.matmul(q, T.transpose(k, (0, 1, 3, 2))), 1.0 / np.sqrt(hd))
    weights = T.softmax(scores, axis=-1)
    mixed = T.reshape(T.transpose(T.matmul(weights, v), (0, 2, 1, 3)), (n, t, d))
    out = lp.proj(mixed)
    return (out, weights) if return_weights else out


def transformer_layer(z: Tensor, lp: LayerParams) -> Tensor:
    z = attention(lp.ln1(z), lp) + z
    return lp.fc2(T.relu(lp.fc1(lp.ln2(z)))) + z


def encode(x: Tensor, params: EncoderGroupParams) -> Tensor:
    z = tokenize(x, params)
    for lp in params.layers:
        z = transformer_layer(z, lp)
    n, c, g, _ = x.shape
    tokens = params.out(z)
    return T.reshape(T.transpose(tokens, (0, 2, 1)), (n, c, g, g))


def encode_group(features, params: EncoderGroupParams) -> list[Tensor]:
    features = list(features)
    if len(features) != 3:
        raise ShapeError(f"encode_group: expected 3 feature maps, got {len(features)}")
    if len({f.shape for f in features}) != 1:
        raise ShapeError(f"encode_group: shapes differ {[f.shape for f in features]}")
    return [encode(f, params) for f in features]
