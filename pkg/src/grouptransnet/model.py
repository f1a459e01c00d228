"""Full network: two streams -> purification -> transition -> grouped fusion ->
shared encoders -> cluster integration -> three supervised heads."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ciu, mte
from .backbone import BackboneConfig, init_backbone
from .config import Config
from .heads import HeadParams, predict_heads
from .mpm import ModalPurification
from .nn import Module
from .scale_unification import Transition, make_sum_h, make_sum_m, sum_h, sum_m, transition
from .tensor import Tensor


@dataclass
class Outputs:
    maps: list[Tensor]            # S1, S2, S3 in (0, 1), N x 1 x S x S
    transitioned: list[Tensor]    # f_t1..f_t5
    high: list[Tensor]            # hf3, hf4, hf5
    mid: list[Tensor]             # mf2, mf3, mf4
    high_encoded: list[Tensor]    # h'f3, h'f4, h'f5
    mid_encoded: list[Tensor]     # m'f2, m'f3, m'f4
    integrated: list[Tensor]      # f'1, f'2, f'3


class GroupTransNet(Module):
    def __init__(self, config: Config):
        self.config = config
        ct = config.transition_channels
        self.rgb, self.depth = init_backbone(
            BackboneConfig(config.input_size, tuple(config.level_channels), config.seed))
        seeds = np.random.SeedSequence([config.seed, 1]).spawn(6)
        rngs = [np.random.default_rng(s) for s in seeds]
        self.mpm = ModalPurification(rngs[0], config.level_channels, config.reduction,
                                     config.sa_kernel, config.purify_rounds)
        self.transition = Transition(rngs[1], config.level_channels, ct)
        self.sum_h = make_sum_h(rngs[2], ct)
        self.sum_m = make_sum_m(rngs[2], ct)
        enc = dict(dim=config.embed_dim, heads=config.heads, layers=config.layers,
                   mlp_ratio=config.mlp_ratio)
        self.mte_h = mte.EncoderGroupParams(rngs[3], ct, config.grid_high, **enc)
        self.mte_m = mte.EncoderGroupParams(rngs[3], ct, config.grid_mid, **enc)
        self.ciu = [ciu.CiuParams(rngs[4], ct) for _ in range(3)]
        self.heads = [HeadParams(rngs[5], ct) for _ in range(3)]

    def __call__(self, rgb: Tensor, depth: Tensor) -> Outputs:
        fused = self.mpm(self.rgb(rgb), self.depth(depth))
        ft = transition(fused, self.transition)
        high = list(sum_h(ft[2], ft[3], ft[4], self.sum_h))
        mid = list(sum_m(ft[1], ft[2], ft[3], self.sum_m))
        high_enc = mte.encode_group(high, self.mte_h)
        mid_enc = mte.encode_group(mid, self.mte_m)
        clusters = ciu.cluster(high_enc, mid_enc)
        integrated = [ciu.integrate(pair, ft[0], p) for pair, p in zip(clusters, self.ciu)]
        maps = predict_heads(integrated, self.heads, self.config.input_size)
        return Outputs(maps, ft, high, mid, high_enc, mid_enc, integrated)

    def final_map(self, out: Outputs) -> np.ndarray:
        if self.config.final_head == "mean":
            return np.mean([m.data for m in out.maps], axis=0)
        return out.maps[0].data
