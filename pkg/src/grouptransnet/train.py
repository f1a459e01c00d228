from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .config import Config
from .data import SamplePair, augment, stack
from .loss import total_loss
from .model import GroupTransNet
from .optim import AdamState, adam_step, step_decay
from .tensor import NonFiniteError, Tensor

log = logging.getLogger(__name__)


@dataclass
class EpochReport:
    epoch: int
    loss: float
    lr: float


def _batches(n: int, batch_size: int, seed: int, epoch: int) -> list[np.ndarray]:
    order = np.random.default_rng([seed, epoch]).permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def _locate_non_finite(model: GroupTransNet, rgb, depth, gt, window) -> str:
    try:
        with T.debug_mode(), T.no_grad():
            total_loss(model(Tensor(rgb), Tensor(depth)).maps, gt, window)
    except NonFiniteError as err:
        return err.op
    return "loss"


def train_epoch(model: GroupTransNet, dataset: list[SamplePair], config: Config,
                state: AdamState, epoch: int) -> EpochReport:
    """One pass over ``dataset``; mini-batch order and augmentation are functions of (seed, epoch)."""
    if not dataset:
        raise ValueError("train_epoch: empty dataset")
    state.lr = step_decay(config.lr, epoch, config.decay_factor, config.decay_period)
    named = list(model.named_parameters())
    params = [p for _, p in named]
    losses = []
    for b, idx in enumerate(_batches(len(dataset), config.batch_size, config.seed, epoch)):
        pairs = [dataset[i] for i in idx]
        if config.augment:
            pairs = [augment(p, [config.seed, epoch, int(i)]) for p, i in zip(pairs, idx)]
        rgb, depth, gt = stack(pairs)
        T.zero_grad(params)
        loss = total_loss(model(Tensor(rgb), Tensor(depth)).maps, gt, config.ppa_window)
        value = loss.item()
        if not np.isfinite(value):
            op = _locate_non_finite(model, rgb, depth, gt, config.ppa_window)
            raise NonFiniteError(op, f"epoch {epoch} batch {b}: non-finite loss; first "
                                     f"non-finite tensor produced by op '{op}'")
        T.backward(loss)
        adam_step(named, state)
        losses.append(value * len(idx))
    return EpochReport(epoch, float(sum(losses) / len(dataset)), state.lr)


def predict(model: GroupTransNet, rgb: np.ndarray, depth: np.ndarray, batch_size: int = 8) -> np.ndarray:
    """Final saliency map for N x 3 x S x S / N x 1 x S x S arrays, without building a graph."""
    out = []
    with T.no_grad():
        for i in range(0, len(rgb), batch_size):
            res = model(Tensor(rgb[i:i + batch_size]), Tensor(depth[i:i + batch_size]))
            out.append(model.final_map(res))
    return np.concatenate(out)


def dataset_mae(model: GroupTransNet, dataset: list[SamplePair]) -> float:
    rgb, depth, gt = stack(dataset)
    return float(np.abs(predict(model, rgb, depth) - gt).mean())


def fit(model: GroupTransNet, dataset: list[SamplePair], config: Config, epochs: int | None = None,
        target_mae: float | None = None, eval_every: int = 5, state: AdamState | None = None,
        start_epoch: int = 0, on_epoch=None) -> tuple[list[EpochReport], float | None]:
    """Train for up to ``epochs``; with ``target_mae`` stop as soon as train-set MAE drops below it."""
    state = state or AdamState(lr=config.lr)
    reports: list[EpochReport] = []
    mae = None
    for epoch in range(start_epoch, epochs if epochs is not None else config.epochs):
        report = train_epoch(model, dataset, config, state, epoch)
        reports.append(report)
        log.info("epoch=%d loss=%.6f lr=%g", report.epoch, report.loss, report.lr)
        if on_epoch is not None:
            on_epoch(report, state)
        if target_mae is not None and (epoch + 1) % eval_every == 0:
            mae = dataset_mae(model, dataset)
            if mae < target_mae:
                break
    return reports, mae
