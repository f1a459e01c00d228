from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


def step_decay(base_lr: float, epoch: int, factor: float, period: int) -> float:
    """Learning rate for 0-based ``epoch``: multiplied by ``factor`` after every ``period`` epochs."""
    return base_lr * factor ** (epoch // period) if period > 0 else base_lr


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(named_params: list[tuple[str, Tensor]], state: AdamState) -> AdamState:
    """One bias-corrected Adam update, in place on ``param.data`` (replaced, not mutated)."""
    missing = [name for name, p in named_params if p.grad is None]
    if missing:
        raise ValueError(f"adam_step: no gradient for {len(missing)} parameter(s), first: {missing[0]}")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name, p in named_params:
        g = p.grad
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[name] + (1.0 - state.beta2) * g * g
        state.m[name], state.v[name] = m, v
        p.data = p.data - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state
