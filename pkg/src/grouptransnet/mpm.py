"""Modal purification: multiplicative cross-modal mixing, then CBAM-style gating."""
from __future__ import annotations

import numpy as np

from . import tensor as T
from .nn import Conv2d, Linear, Module
from .tensor import ShapeError, Tensor


def purify(f_rgb: Tensor, f_d: Tensor, rounds: int = 1) -> Tensor:
    """mix = rgb*d; rgb <- (mix+rgb)*rgb; d <- (mix+d)*d; repeated ``rounds`` times, then rgb + d."""
    if f_rgb.shape != f_d.shape:
        raise ShapeError(f"purify: modal features differ in shape {f_rgb.shape} vs {f_d.shape}")
    for _ in range(rounds):
        mixed = f_rgb * f_d
        f_rgb, f_d = (mixed + f_rgb) * f_rgb, (mixed + f_d) * f_d
    return f_rgb + f_d


class MpmParams(Module):
    """One level's attention weights: shared two-layer channel MLP and a 7x7 spatial conv."""

    def __init__(self, rng: np.random.Generator, channels: int, reduction: int = 4, kernel: int = 7):
        if channels % reduction:
            raise ValueError(f"reduction {reduction} does not divide {channels} channels")
        self.channels = channels
        self.fc1 = Linear(rng, channels, channels // reduction, bias=False)
        self.fc2 = Linear(rng, channels // reduction, channels, bias=False)
        self.spatial = Conv2d(rng, 2, 1, kernel, bias=False)


def channel_gate(x: Tensor, params: MpmParams) -> Tensor:
    n, c = x.shape[:2]
    if c != params.channels:
        raise ShapeError(f"channel attention built for {params.channels} channels, got {c}")

    def mlp(v):
        return params.fc2(T.relu(params.fc1(v)))

    avg = T.reduce("mean", x, (2, 3))
    peak = T.reduce("max", x, (2, 3))
    return T.reshape(T.sigmoid(mlp(avg) + mlp(peak)), (n, c, 1, 1))


def channel_attention(x: Tensor, params: MpmParams) -> Tensor:
    return x * T.expand(channel_gate(x, params), x.shape)


def spatial_gate(x: Tensor, params: MpmParams) -> Tensor:
    pooled = T.concat([T.reduce("mean", x, (1,), keepdims=True),
                       T.reduce("max", x, (1,), keepdims=True)], axis=1)
    return T.sigmoid(params.spatial(pooled))


def spatial_attention(x: Tensor, params: MpmParams) -> Tensor:
    return x * T.expand(spatial_gate(x, params), x.shape)


def mpm_forward(f_rgb: Tensor, f_d: Tensor, params: MpmParams, rounds: int = 1) -> Tensor:
    return spatial_attention(channel_attention(purify(f_rgb, f_d, rounds), params), params)


class ModalPurification(Module):
    def __init__(self, rng: np.random.Generator, level_channels, reduction: int = 4,
                 kernel: int = 7, rounds: int = 1):
        self.levels = [MpmParams(rng, c, reduction, kernel) for c in level_channels]
        self.rounds = rounds

    def __call__(self, rgb_pyramid, depth_pyramid) -> list[Tensor]:
        return [mpm_forward(a, b, p, self.rounds)
                for a, b, p in zip(rgb_pyramid, depth_pyramid, self.levels)]
