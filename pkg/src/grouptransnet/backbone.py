"""Two-stream five-level convolutional feature extractor.

Stands in for an ImageNet ResNet-50: no pretrained weights, but the same
stride chain (2, 4, 8, 16, 32) and per-level channel widths, which is all
the downstream modules depend on.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import ConvReLU, Module, conv_param_count
from .tensor import ShapeError, Tensor

FeaturePyramid = list  # five Tensors f1..f5 at strides 2, 4, 8, 16, 32


@dataclass(frozen=True)
class BackboneConfig:
    input_size: int = 64
    level_channels: tuple[int, ...] = (8, 16, 32, 48, 64)
    seed: int = 0

    def __post_init__(self):
        ch = self.level_channels
        if self.input_size <= 0 or self.input_size % 32:
            raise ValueError(f"input_size must be a positive multiple of 32, got {self.input_size}")
        if len(ch) != 5 or ch[0] <= 0 or any(b <= a for a, b in zip(ch, ch[1:])):
            raise ValueError(f"level_channels must be 5 strictly increasing ints, got {ch}")


class Stage(Module):
    def __init__(self, rng, cin: int, cout: int):
        self.down = ConvReLU(rng, cin, cout, 3, stride=2)
        self.conv = ConvReLU(rng, cout, cout, 3)

    def __call__(self, x: Tensor) -> Tensor:
        return self.conv(self.down(x))


class Stream(Module):
    def __init__(self, rng: np.random.Generator, in_channels: int, config: BackboneConfig):
        self.in_channels = in_channels
        self.input_size = config.input_size
        widths = (in_channels,) + tuple(config.level_channels)
        self.stages = [Stage(rng, a, b) for a, b in zip(widths, widths[1:])]

    def __call__(self, image: Tensor) -> FeaturePyramid:
        return extract_pyramid(image, self)


def init_backbone(config: BackboneConfig) -> tuple[Stream, Stream]:
    """Independent RGB (3-channel) and depth (1-channel) streams."""
    rgb_seed, depth_seed = np.random.SeedSequence(config.seed).spawn(2)
    return (Stream(np.random.default_rng(rgb_seed), 3, config),
            Stream(np.random.default_rng(depth_seed), 1, config))


def stream_param_count(in_channels: int, level_channels) -> int:
    widths = (in_channels,) + tuple(level_channels)
    return sum(conv_param_count(a, b, 3) + conv_param_count(b, b, 3)
               for a, b in zip(widths, widths[1:]))


def extract_pyramid(image: Tensor, params: Stream) -> FeaturePyramid:
    if image.ndim != 4 or image.shape[1] != params.in_channels:
        raise ShapeError(f"stream expects N x {params.in_channels} x S x S input, got {image.shape}")
    if image.shape[2:] != (params.input_size, params.input_size):
        raise ShapeError(f"stream expects {params.input_size}px input, got {image.shape[2:]}")
    levels = []
    x = image
    for stage in params.stages:
        x = stage(x)
        levels.append(x)
    return levels
