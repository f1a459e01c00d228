"""Transition layer and the two grouped scale-unification fusers.

Each group resizes its three levels to the middle level's resolution first,
then concatenates symmetrically; a 3x3 conv + ReLU after every concatenation
returns the width to ``C_t`` so one shared encoder can consume all three.
"""
from __future__ import annotations

import numpy as np

from . import tensor as T
from .nn import ConvReLU, Module
from .tensor import ShapeError, Tensor


class Transition(Module):
    def __init__(self, rng: np.random.Generator, level_channels, out_channels: int):
        self.level_channels = tuple(level_channels)
        self.convs = [ConvReLU(rng, c, out_channels, 3) for c in level_channels]


def transition(pyramid, params: Transition) -> list[Tensor]:
    out = []
    for i, (f, conv) in enumerate(zip(pyramid, params.convs)):
        if f.shape[1] != params.level_channels[i]:
            raise ShapeError(f"transition: level {i + 1} has {f.shape[1]} channels, "
                             f"expected {params.level_channels[i]}")
        out.append(conv(f))
    return out


class SumParams(Module):
    """Fuse convs for one group; ``arity`` gives each branch's concat width in units of C_t."""

    def __init__(self, rng: np.random.Generator, channels: int, arity: tuple[int, int, int]):
        self.channels = channels
        self.arity = arity
        self.fuse = [ConvReLU(rng, a * channels, channels, 3) for a in arity]


def _to_middle(high: Tensor, mid: Tensor, low: Tensor) -> tuple[Tensor, Tensor, Tensor]:
    s = mid.shape[2]
    if high.shape[2] * 2 != s or low.shape[2] != 2 * s or mid.shape[2] != mid.shape[3]:
        raise ShapeError(f"scale unification needs sides (s/2, s, 2s), got "
                         f"{high.shape[2:]}, {mid.shape[2:]}, {low.shape[2:]}")
    return (T.resize(high, (s, s), "bilinear_up"), mid, T.resize(low, (s, s), "avg_down"))


def sum_h(f_t3: Tensor, f_t4: Tensor, f_t5: Tensor, params: SumParams):
    """High group: returns (hf3, hf4, hf5), all at f4's resolution."""
    h, m, l = _to_middle(f_t5, f_t4, f_t3)
    fh, fm, fl = params.fuse
    out_h = fh(T.concat([h, m]))
    out_m = fm(T.concat([m, h]))
    out_l = fl(T.concat([l, m, h]))
    return out_l, out_m, out_h


def sum_m(f_t2: Tensor, f_t3: Tensor, f_t4: Tensor, params: SumParams):
    """Middle group: returns (mf2, mf3, mf4), all at f3's resolution."""
    h, m, l = _to_middle(f_t4, f_t3, f_t2)
    fh, fm, fl = params.fuse
    out_h = fh(T.concat([h, m, l]))
    out_m = fm(T.concat([m, l]))
    out_l = fl(T.concat([l, m]))
    return out_l, out_m, out_h


def make_sum_h(rng, channels: int) -> SumParams:
    return SumParams(rng, channels, (2, 2, 3))


def make_sum_m(rng, channels: int) -> SumParams:
    return SumParams(rng, channels, (3, 2, 2))
