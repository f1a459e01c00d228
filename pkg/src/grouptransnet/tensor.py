"""Reverse-mode autograd over float64 numpy arrays.

Every op records its parents and a backward closure on the output tensor;
``backward`` walks that graph once in reverse topological order and then
drops it. There is no implicit broadcasting: element-wise ops demand equal
shapes and callers use ``expand`` / ``resize`` explicitly.
"""
from __future__ import annotations

import contextlib
import threading
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor", "ShapeError", "NonFiniteError",
    "add", "sub", "mul", "div", "scale", "shift", "neg",
    "matmul", "linear", "conv2d", "relu", "sigmoid", "exp", "log", "clip",
    "softmax", "layer_norm", "resize", "concat", "reduce", "reshape",
    "transpose", "expand", "backward", "no_grad", "debug_mode", "record_kinks",
    "inject_fault", "zero_grad",
]


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    def __init__(self, op: str, message: str | None = None):
        super().__init__(message or f"non-finite values produced by op '{op}'")
        self.op = op


class _State(threading.local):
    def __init__(self) -> None:
        self.grad_enabled = True
        self.debug = False
        self.kinks: list | None = None
        self.faults: frozenset[str] = frozenset()


_state = _State()


OPS = frozenset({
    "add", "sub", "mul", "div", "scale", "shift", "neg", "relu", "sigmoid", "exp", "log", "clip",
    "matmul", "linear", "conv2d", "softmax", "layer_norm", "resize", "concat", "sum", "mean", "max",
    "reshape", "transpose", "expand",
})


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.op = "leaf"
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other) if isinstance(other, Tensor) else shift(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other) if isinstance(other, Tensor) else shift(self, -other)

    def __rsub__(self, other):
        return shift(neg(self), other)

    def __mul__(self, other):
        return mul(self, other) if isinstance(other, Tensor) else scale(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other) if isinstance(other, Tensor) else scale(self, 1.0 / other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self) -> None:
        backward(self)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: Sequence[Tensor], grad_fn: Callable, op: str) -> Tensor:
    if _state.debug and not np.all(np.isfinite(data)):
        raise NonFiniteError(op)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.op = op
    needs = _state.grad_enabled and any(p.requires_grad for p in parents)
    out.requires_grad = needs
    if needs:
        out._parents = tuple(parents)
        if op in _state.faults:
            out._backward = lambda g, _f=grad_fn: tuple(
                None if x is None else 1.5 * x for x in _f(g))
        else:
            out._backward = grad_fn
    else:
        out._parents = ()
        out._backward = None
    return out


def _record_kink(signature: np.ndarray) -> None:
    if _state.kinks is not None:
        _state.kinks.append(signature.tobytes())


def _check_same(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


@contextlib.contextmanager
def no_grad():
    prev = _state.grad_enabled
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = prev


@contextlib.contextmanager
def debug_mode(enabled: bool = True):
    """Raise NonFiniteError from the first op whose output is not finite."""
    prev = _state.debug
    _state.debug = enabled
    try:
        yield
    finally:
        _state.debug = prev


@contextlib.contextmanager
def record_kinks():
    """Collect the activation pattern of every relu / max / clip evaluated inside.

    Two evaluations with equal patterns lie on the same smooth piece of the
    function, which is what finite differences need.
    """
    prev = _state.kinks
    sink: list[bytes] = []
    _state.kinks = sink
    try:
        yield sink
    finally:
        _state.kinks = prev


@contextlib.contextmanager
def inject_fault(*ops: str):
    """Scale the backward rule of the named ops by 1.5 (negative-control hook)."""
    unknown = sorted(set(ops) - OPS)
    if unknown:
        raise ValueError(f"inject_fault: unknown op {unknown[0]!r}")
    prev = _state.faults
    _state.faults = prev | frozenset(ops)
    try:
        yield
    finally:
        _state.faults = prev


# ---------------------------------------------------------------- element-wise

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same("add", a, b)
    return _make(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same("sub", a, b)
    return _make(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same("mul", a, b)
    return _make(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data), "mul")


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_same("div", a, b)
    out = a.data / b.data
    return _make(out, (a, b), lambda g: (g / b.data, -g * out / b.data), "div")


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)
    return _make(x.data * c, (x,), lambda g: (g * c,), "scale")


def shift(x: Tensor, c: float) -> Tensor:
    return _make(x.data + float(c), (x,), lambda g: (g,), "shift")


def neg(x: Tensor) -> Tensor:
    return _make(-x.data, (x,), lambda g: (-g,), "neg")


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    _record_kink(mask)
    return _make(np.maximum(x.data, 0.0), (x,), lambda g: (g * mask,), "relu")


def _sigmoid(v: np.ndarray) -> np.ndarray:
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    e = np.exp(v[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def sigmoid(x: Tensor) -> Tensor:
    s = _sigmoid(x.data)
    return _make(s, (x,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def exp(x: Tensor) -> Tensor:
    e = np.exp(x.data)
    return _make(e, (x,), lambda g: (g * e,), "exp")


def log(x: Tensor) -> Tensor:
    return _make(np.log(x.data), (x,), lambda g: (g / x.data,), "log")


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    inside = (x.data >= lo) & (x.data <= hi)
    _record_kink(inside)
    return _make(np.clip(x.data, lo, hi), (x,), lambda g: (g * inside,), "clip")


# ---------------------------------------------------------------- linear algebra

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes; leading (batch) axes must match exactly."""
    if a.ndim < 2 or b.ndim < 2 or a.shape[:-2] != b.shape[:-2] or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    ad, bd = a.data, b.data

    def grad_fn(g):
        return g @ np.swapaxes(bd, -1, -2), np.swapaxes(ad, -1, -2) @ g

    return _make(ad @ bd, (a, b), grad_fn, "matmul")


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """``x @ w + b`` applied to the last axis of ``x``; ``w`` is (in, out)."""
    if w.ndim != 2 or x.shape[-1] != w.shape[0]:
        raise ShapeError(f"linear: input {x.shape} does not match weight {w.shape}")
    if b is not None and b.shape != (w.shape[1],):
        raise ShapeError(f"linear: bias {b.shape} does not match weight {w.shape}")
    xd, wd = x.data, w.data
    out = xd @ wd
    if b is not None:
        out = out + b.data

    def grad_fn(g):
        g2 = g.reshape(-1, g.shape[-1])
        dw = xd.reshape(-1, xd.shape[-1]).T @ g2
        dx = g @ wd.T
        return (dx, dw) if b is None else (dx, dw, g2.sum(axis=0))

    parents = (x, w) if b is None else (x, w, b)
    return _make(out, parents, grad_fn, "linear")


def conv2d(x: Tensor, w: Tensor, bias: Tensor | None = None, stride: int = 1, pad: int = 0) -> Tensor:
    """2-D cross-correlation with zero padding on N x C x H x W input.

    A stride that leaves trailing *padding* rows unvisited is accepted (the usual
    stride-2, pad-1 downsampling); one that would skip real input rows is not.
    """
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError(f"conv2d: expected 4-d input and weight, got {x.shape}, {w.shape}")
    n, c, h, wd_ = x.shape
    o, c2, k, k2 = w.shape
    if c != c2 or k != k2 or k % 2 == 0:
        raise ShapeError(f"conv2d: input {x.shape} incompatible with kernel {w.shape}")
    if bias is not None and bias.shape != (o,):
        raise ShapeError(f"conv2d: bias {bias.shape} does not match {o} output channels")
    if pad < 0 or stride < 1:
        raise ValueError("conv2d: pad must be >= 0 and stride >= 1")
    span_h, span_w = h + 2 * pad - k, wd_ + 2 * pad - k
    if span_h < 0 or span_w < 0 or span_h % stride > pad or span_w % stride > pad:
        raise ShapeError(
            f"conv2d: output size ({h}+2*{pad}-{k})/{stride}+1 is not integral for input {x.shape}")
    ho, wo = span_h // stride + 1, span_w // stride + 1

    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x.data
    win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))
    win = win[:, :, : (ho - 1) * stride + 1 : stride, : (wo - 1) * stride + 1 : stride]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * k * k)
    w2 = w.data.reshape(o, c * k * k)
    out = (cols @ w2.T).reshape(n, ho, wo, o)
    if bias is not None:
        out += bias.data
    out = np.ascontiguousarray(out.transpose(0, 3, 1, 2))

    def grad_fn(g):
        g2 = g.transpose(0, 2, 3, 1).reshape(-1, o)
        dw = (g2.T @ cols).reshape(o, c, k, k)
        dcols = np.ascontiguousarray(
            (g2 @ w2).reshape(n, ho, wo, c, k, k).transpose(0, 3, 4, 5, 1, 2))
        dxp = np.zeros(xp.shape)
        for i in range(k):
            for j in range(k):
                dxp[:, :, i : i + stride * (ho - 1) + 1 : stride,
                    j : j + stride * (wo - 1) + 1 : stride] += dcols[:, :, i, j]
        dx = dxp[:, :, pad : pad + h, pad : pad + wd_] if pad else dxp
        if bias is None:
            return dx, dw
        return dx, dw, g2.sum(axis=0)

    parents = (x, w) if bias is None else (x, w, bias)
    return _make(out, parents, grad_fn, "conv2d")


# ---------------------------------------------------------------- normalisation

def softmax(x: Tensor, axis: int = -1) -> Tensor:
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)

    def grad_fn(g):
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)

    return _make(s, (x,), grad_fn, "softmax")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError(f"layer_norm: gamma/beta {gamma.shape}/{beta.shape} vs last dim {d}")
    if eps <= 0:
        raise ValueError("layer_norm: eps must be positive")
    # shift by the first entry so constant tokens centre to exactly zero
    x0 = x.data[..., :1]
    xc = x.data - x0
    xc = xc - xc.mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * rstd
    gd = gamma.data

    def grad_fn(g):
        dxhat = g * gd
        dx = rstd * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                     - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
        flat_g = g.reshape(-1, d)
        return dx, (flat_g * xhat.reshape(-1, d)).sum(axis=0), flat_g.sum(axis=0)

    return _make(xhat * gd + beta.data, (x, gamma, beta), grad_fn, "layer_norm")


# ---------------------------------------------------------------- resampling

@lru_cache(maxsize=64)
def interp_matrix(src: int, dst: int) -> np.ndarray:
    """Row-stochastic (dst x src) linear-interpolation matrix, half-pixel centres."""
    m = np.zeros((dst, src))
    ratio = src / dst
    for i in range(dst):
        pos = max((i + 0.5) * ratio - 0.5, 0.0)
        i0 = min(int(np.floor(pos)), src - 1)
        i1 = min(i0 + 1, src - 1)
        lam = pos - i0
        m[i, i0] += 1.0 - lam
        m[i, i1] += lam
    m.setflags(write=False)
    return m


def resize(x: Tensor, target: tuple[int, int], mode: str = "bilinear_up") -> Tensor:
    if x.ndim != 4:
        raise ShapeError(f"resize: expected N x C x H x W, got {x.shape}")
    h, w = x.shape[2:]
    th, tw = target
    if mode == "bilinear_up":
        if th < h or tw < w:
            raise ShapeError(f"resize: bilinear_up cannot shrink {(h, w)} to {(th, tw)}")
        if (th, tw) == (h, w):
            return x
        mh, mw = interp_matrix(h, th), interp_matrix(w, tw)
        out = mh @ x.data @ mw.T
        return _make(out, (x,), lambda g: (mh.T @ g @ mw,), "resize")
    if mode == "avg_down":
        if th <= 0 or tw <= 0 or h % th or w % tw:
            raise ShapeError(f"resize: avg_down {(h, w)} -> {(th, tw)} is not an integer factor")
        fh, fw = h // th, w // tw
        n, c = x.shape[:2]
        out = x.data.reshape(n, c, th, fh, tw, fw).mean(axis=(3, 5))

        def grad_fn(g):
            spread = np.broadcast_to(g[:, :, :, None, :, None] / (fh * fw), (n, c, th, fh, tw, fw))
            return (spread.reshape(n, c, h, w),)

        return _make(out, (x,), grad_fn, "resize")
    raise ValueError(f"resize: unknown mode {mode!r}")


# ---------------------------------------------------------------- structure

def concat(parts: Sequence[Tensor], axis: int = 1) -> Tensor:
    parts = list(parts)
    if not parts:
        raise ShapeError("concat: nothing to concatenate")
    if len(parts) == 1:
        return parts[0]
    ref = parts[0].shape
    ax = axis % len(ref)
    for p in parts[1:]:
        if len(p.shape) != len(ref) or any(
                a != b for i, (a, b) in enumerate(zip(p.shape, ref)) if i != ax):
            raise ShapeError(f"concat: {p.shape} does not match {ref} off axis {axis}")
    cuts = np.cumsum([p.shape[ax] for p in parts])[:-1]
    out = np.concatenate([p.data for p in parts], axis=ax)
    return _make(out, parts, lambda g: tuple(np.split(g, cuts, axis=ax)), "concat")


def reduce(kind: str, x: Tensor, axes: Iterable[int], keepdims: bool = False) -> Tensor:
    axes = tuple(sorted(a % x.ndim for a in axes))
    if len(set(axes)) != len(axes):
        raise ValueError(f"reduce: repeated axes {axes}")
    kept_shape = tuple(1 if i in axes else s for i, s in enumerate(x.shape))
    out_shape = kept_shape if keepdims else tuple(s for i, s in enumerate(x.shape) if i not in axes)

    if kind in ("sum", "mean"):
        count = int(np.prod([x.shape[a] for a in axes])) if axes else 1
        out = x.data.sum(axis=axes) if kind == "sum" else x.data.mean(axis=axes)
        factor = 1.0 if kind == "sum" else 1.0 / count

        def grad_fn(g):
            return (np.broadcast_to(g.reshape(kept_shape) * factor, x.shape).copy(),)

        return _make(np.asarray(out).reshape(out_shape), (x,), grad_fn, kind)

    if kind == "max":
        rest = [i for i in range(x.ndim) if i not in axes]
        perm = rest + list(axes)
        moved = x.data.transpose(perm)
        lead = moved.shape[: len(rest)]
        flat = moved.reshape(lead + (-1,))
        idx = flat.argmax(axis=-1)
        _record_kink(idx)
        out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
        inv = np.argsort(perm)

        def grad_fn(g):
            gf = np.zeros(flat.shape)
            np.put_along_axis(gf, idx[..., None], g.reshape(lead)[..., None], axis=-1)
            return (gf.reshape(moved.shape).transpose(inv),)

        return _make(out.reshape(out_shape), (x,), grad_fn, "max")

    raise ValueError(f"reduce: unknown kind {kind!r}")


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    src = x.shape
    return _make(x.data.reshape(shape), (x,), lambda g: (g.reshape(src),), "reshape")


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    inv = np.argsort(axes)
    return _make(x.data.transpose(axes), (x,), lambda g: (g.transpose(inv),), "transpose")


def expand(x: Tensor, shape: Sequence[int]) -> Tensor:
    """Explicit broadcast of size-1 axes up to ``shape`` (same rank required)."""
    shape = tuple(shape)
    if len(shape) != x.ndim or any(s != t and s != 1 for s, t in zip(x.shape, shape)):
        raise ShapeError(f"expand: cannot expand {x.shape} to {shape}")
    axes = tuple(i for i, (s, t) in enumerate(zip(x.shape, shape)) if s != t)

    def grad_fn(g):
        return (g.sum(axis=axes, keepdims=True),)

    return _make(np.broadcast_to(x.data, shape).copy(), (x,), grad_fn, "expand")


# ---------------------------------------------------------------- backward

def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every requires_grad leaf, then drop the graph."""
    if loss.data.size != 1:
        raise ShapeError(f"backward: loss must be a scalar, got shape {loss.shape}")
    if not loss.requires_grad:
        raise RuntimeError("backward: loss does not depend on any tensor requiring grad")
    if loss._backward is None and loss.op != "leaf":
        raise RuntimeError("backward: graph already consumed")

    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    grads: dict[int, np.ndarray] = {id(loss): np.ones(loss.shape)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for p, pg in zip(node._parents, node._backward(g)):
            if pg is None or not p.requires_grad:
                continue
            key = id(p)
            grads[key] = pg if key not in grads else grads[key] + pg
        node._parents = ()
        node._backward = None


def zero_grad(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None
