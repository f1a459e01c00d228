"""Parameter containers shared by every model component."""
from __future__ import annotations

from typing import Iterator

import numpy as np

from . import tensor as T
from .tensor import Tensor


class Module:
    """Collects Tensor parameters held as attributes, in lists, or in child modules.

    A child object reachable along several paths (a shared encoder) is
    reported once, under the first name it is found at.
    """

    def named_parameters(self, prefix: str = "", _seen: set | None = None) -> Iterator[tuple[str, Tensor]]:
        seen = set() if _seen is None else _seen
        for name, value in vars(self).items():
            yield from _walk(value, prefix + name, seen)

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.parameters())


def _walk(value, name: str, seen: set):
    if isinstance(value, Tensor):
        if value.requires_grad and id(value) not in seen:
            seen.add(id(value))
            yield name, value
    elif isinstance(value, Module):
        if id(value) not in seen:
            seen.add(id(value))
            yield from value.named_parameters(name + ".", seen)
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            yield from _walk(item, f"{name}.{i}", seen)


def uniform(rng: np.random.Generator, shape, bound: float) -> Tensor:
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


class Conv2d(Module):
    """k x k convolution; He-uniform weights, bias ~ U(+-1/sqrt(fan_in))."""

    def __init__(self, rng: np.random.Generator, cin: int, cout: int, k: int = 3,
                 stride: int = 1, bias: bool = True):
        fan_in = cin * k * k
        self.weight = uniform(rng, (cout, cin, k, k), np.sqrt(6.0 / fan_in))
        self.bias = uniform(rng, (cout,), 1.0 / np.sqrt(fan_in)) if bias else None
        self.stride = stride
        self.pad = (k - 1) // 2

    def __call__(self, x: Tensor) -> Tensor:
        return T.conv2d(x, self.weight, self.bias, stride=self.stride, pad=self.pad)


class ConvReLU(Conv2d):
    def __call__(self, x: Tensor) -> Tensor:
        return T.relu(super().__call__(x))


class Linear(Module):
    def __init__(self, rng: np.random.Generator, din: int, dout: int, bias: bool = True):
        bound = 1.0 / np.sqrt(din)
        self.weight = uniform(rng, (din, dout), bound)
        self.bias = uniform(rng, (dout,), bound) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return T.linear(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        self.gamma = Tensor(np.ones(dim), requires_grad=True)
        self.beta = Tensor(np.zeros(dim), requires_grad=True)
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return T.layer_norm(x, self.gamma, self.beta, self.eps)


def conv_param_count(cin: int, cout: int, k: int, bias: bool = True) -> int:
    return cout * cin * k * k + (cout if bias else 0)
