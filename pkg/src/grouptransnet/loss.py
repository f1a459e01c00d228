"""Pixel-position-aware loss: boundary-weighted BCE plus boundary-weighted IoU."""
from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import ShapeError, Tensor

CLAMP = 1e-7


def box_mean(x: np.ndarray, k: int) -> np.ndarray:
    """k x k stride-1 mean over the last two axes, averaging only in-bounds pixels."""
    r = k // 2
    h, w = x.shape[-2:]

    def box_sum(a):
        pad = [(0, 0)] * (a.ndim - 2) + [(r + 1, r), (r + 1, r)]
        c = np.pad(a, pad).cumsum(-2).cumsum(-1)
        return (c[..., k:k + h, k:k + w] - c[..., :h, k:k + w]
                - c[..., k:k + h, :w] + c[..., :h, :w])

    return box_sum(x) / box_sum(np.ones((h, w)))


def boundary_weights(gt: np.ndarray, window: int = 31) -> np.ndarray:
    return 1.0 + 5.0 * np.abs(box_mean(gt, window) - gt)


def _check(pred: Tensor, gt) -> np.ndarray:
    g = np.asarray(gt.data if isinstance(gt, Tensor) else gt, dtype=np.float64)
    if g.shape != pred.shape or pred.ndim != 4:
        raise ShapeError(f"ppa_loss: prediction {pred.shape} vs ground truth {g.shape}")
    if not np.all((g == 0) | (g == 1)):
        raise ValueError("ppa_loss: ground truth must be binary {0, 1}")
    return g


def ppa_loss(pred: Tensor, gt, window: int = 31) -> Tensor:
    """Batch mean of wBCE + wIoU for N x 1 x H x W probabilities ``pred`` and binary ``gt``."""
    g = _check(pred, gt)
    n = pred.shape[0]
    weight = boundary_weights(g, window)
    axes = (1, 2, 3)
    w_t, g_t, wg_t = Tensor(weight), Tensor(g), Tensor(weight * g)

    s = T.clip(pred, CLAMP, 1.0 - CLAMP)
    bce = -(g_t * T.log(s) + (1.0 - g_t) * T.log(1.0 - s))
    wbce = T.reduce("sum", w_t * bce, axes) / Tensor(weight.sum(axis=axes))

    inter = T.reduce("sum", wg_t * pred, axes)
    union = T.reduce("sum", w_t * pred, axes) + Tensor(wg_t.data.sum(axis=axes))
    wiou = 1.0 - (inter + 1.0) / (union - inter + 1.0)
    return T.scale(T.reduce("sum", wbce + wiou, (0,)), 1.0 / n)


def total_loss(preds, gt, window: int = 31) -> Tensor:
    preds = list(preds)
    loss = ppa_loss(preds[0], gt, window)
    for p in preds[1:]:
        loss = loss + ppa_loss(p, gt, window)
    return loss
