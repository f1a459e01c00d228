"""Side-output prediction heads: conv3x3 + ReLU, conv1x1 to one channel, upsample, sigmoid."""
from __future__ import annotations

import numpy as np

from . import tensor as T
from .nn import Conv2d, ConvReLU, Module
from .tensor import Tensor


class HeadParams(Module):
    def __init__(self, rng: np.random.Generator, channels: int):
        self.conv = ConvReLU(rng, channels, channels, 3)
        self.score = Conv2d(rng, channels, 1, 1)


def head_logits(f: Tensor, params: HeadParams, input_side: int) -> Tensor:
    return T.resize(params.score(params.conv(f)), (input_side, input_side), "bilinear_up")


def predict_heads(features, heads, input_side: int) -> list[Tensor]:
    return [T.sigmoid(head_logits(f, p, input_side)) for f, p in zip(features, heads)]
