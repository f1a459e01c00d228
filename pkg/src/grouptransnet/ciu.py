"""Cluster integration: staggered pairing of encoder outputs and cascaded upsample-fuse."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from . import tensor as T
from .nn import ConvReLU, Module
from .tensor import ShapeError, Tensor


class ClusterSet(NamedTuple):
    c1: tuple[Tensor, Tensor]
    c2: tuple[Tensor, Tensor]
    c3: tuple[Tensor, Tensor]


def cluster(h_feats, m_feats) -> ClusterSet:
    """h_feats = (h'f3, h'f4, h'f5), m_feats = (m'f2, m'f3, m'f4)."""
    h_feats, m_feats = list(h_feats), list(m_feats)
    if len(h_feats) != 3 or len(m_feats) != 3:
        raise ShapeError(f"cluster: need 3 + 3 encoder outputs, got {len(h_feats)} + {len(m_feats)}")
    h3, h4, h5 = h_feats
    m2, m3, m4 = m_feats
    return ClusterSet((h5, m4), (h4, m3), (h3, m2))


def up_to(x: Tensor, side: int) -> Tensor:
    return T.resize(x, (side, side), "bilinear_up")


class CiuParams(Module):
    def __init__(self, rng: np.random.Generator, channels: int):
        self.channels = channels
        self.pair_fuse = ConvReLU(rng, 2 * channels, channels, 3)
        self.low_fuse = ConvReLU(rng, 2 * channels, channels, 3)


def integrate(pair, f_t1: Tensor, params: CiuParams) -> Tensor:
    high, mid = pair
    for f in (high, mid, f_t1):
        if f.shape[1] != params.channels:
            raise ShapeError(f"integrate: expected {params.channels} channels, got {f.shape}")
    a = up_to(high, mid.shape[2])
    b = params.pair_fuse(T.concat([a, mid]))
    c = up_to(b, f_t1.shape[2])
    return params.low_fuse(T.concat([c, f_t1]))
