"""Central-difference gradient checker for the autograd engine."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, backward, no_grad, record_kinks, zero_grad


@dataclass
class GradCheckReport:
    tol: float
    errors: list[float] = field(default_factory=list)  # worst relative error per input
    worst_index: list[tuple] = field(default_factory=list)
    checked: int = 0
    skipped: int = 0  # perturbations that crossed a relu/max/clip kink

    @property
    def max_error(self) -> float:
        return max(self.errors, default=0.0)

    @property
    def passed(self) -> bool:
        return self.checked > 0 and self.max_error < self.tol


def _evaluate(fn, inputs) -> tuple[float, list[bytes]]:
    with no_grad(), record_kinks() as kinks:
        value = fn(*inputs).item()
    return value, kinks


def grad_check(
    fn: Callable[..., Tensor],
    inputs: Sequence[Tensor],
    eps: float = 1e-5,
    tol: float = 1e-6,
    samples: int | None = None,
    rng: np.random.Generator | None = None,
    floor: float = 1e-6,
) -> GradCheckReport:
    """Compare analytic gradients of scalar ``fn(*inputs)`` with central differences.

    Relative error per element is ``|a - n| / max(|a|, |n|, floor)``. When
    ``samples`` is given, that many elements per input are drawn at random
    instead of checking every element. A perturbation whose +eps or -eps
    evaluation changes any relu / max / clip activation pattern straddles a
    kink; that element is skipped and, when sampling, another one is drawn.
    """
    if not 1e-6 <= eps <= 1e-3:
        raise ValueError("grad_check: eps must lie in [1e-6, 1e-3]")
    rng = rng or np.random.default_rng(0)
    zero_grad(inputs)
    with record_kinks() as base_kinks:
        out = fn(*inputs)
    backward(out)
    report = GradCheckReport(tol=tol)

    for x in inputs:
        if not x.requires_grad:
            continue
        analytic = x.grad if x.grad is not None else np.zeros(x.shape)
        x.data = np.ascontiguousarray(x.data)
        flat = x.data.reshape(-1)  # a view: writes perturb x in place
        if samples is None:
            order = np.arange(flat.size)
            budget = flat.size
        else:
            order = rng.permutation(flat.size)
            budget = min(samples, flat.size)
        worst, worst_at, done = 0.0, (), 0
        for i in order:
            if done >= budget:
                break
            orig = flat[i]
            flat[i] = orig + eps
            f_plus, k_plus = _evaluate(fn, inputs)
            flat[i] = orig - eps
            f_minus, k_minus = _evaluate(fn, inputs)
            flat[i] = orig
            if k_plus != base_kinks or k_minus != base_kinks:
                report.skipped += 1
                if samples is None:
                    done += 1
                continue
            numeric = (f_plus - f_minus) / (2 * eps)
            a = analytic.reshape(-1)[i]
            err = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            if err > worst:
                worst, worst_at = err, np.unravel_index(i, x.shape)
            done += 1
            report.checked += 1
        report.errors.append(float(worst))
        report.worst_index.append(tuple(int(v) for v in worst_at))
    return report


# ---------------------------------------------------------------- standard suite

def _away_from_zero(rng: np.random.Generator, shape, margin: float = 1e-2) -> np.ndarray:
    x = rng.normal(size=shape)
    return np.where(np.abs(x) < margin, np.sign(x + 1e-300) * margin + x, x)


def primitive_cases(rng: np.random.Generator) -> dict[str, tuple[Callable, list[Tensor]]]:
    """One small scalar-valued probe per differentiable primitive."""
    from . import tensor as T

    def leaf(*shape, positive=False, kink_safe=False):
        if kink_safe:
            data = _away_from_zero(rng, shape)
        else:
            data = rng.uniform(0.5, 1.5, shape) if positive else rng.normal(size=shape)
        return Tensor(data, requires_grad=True)

    def weighted(x: Tensor) -> Tensor:
        # fixed random projection so every output element matters differently
        w = Tensor(np.random.default_rng(x.data.size).normal(size=x.shape))
        return T.reduce("sum", x * w, range(x.ndim))

    return {
        "add": (lambda a, b: weighted(T.add(a, b)), [leaf(2, 3), leaf(2, 3)]),
        "mul": (lambda a, b: weighted(T.mul(a, b)), [leaf(2, 3), leaf(2, 3)]),
        "div": (lambda a, b: weighted(T.div(a, b)), [leaf(2, 3), leaf(2, 3, positive=True)]),
        "matmul": (lambda a, b: weighted(T.matmul(a, b)), [leaf(4, 5), leaf(5, 3)]),
        "linear": (lambda x, w, b: weighted(T.linear(x, w, b)), [leaf(2, 3, 4), leaf(4, 5), leaf(5)]),
        "conv2d": (lambda x, w, b: weighted(T.conv2d(x, w, b, stride=1, pad=1)),
                   [leaf(2, 3, 5, 5), leaf(4, 3, 3, 3), leaf(4)]),
        "conv2d_stride2": (lambda x, w, b: weighted(T.conv2d(x, w, b, stride=2, pad=1)),
                           [leaf(1, 2, 6, 6), leaf(3, 2, 3, 3), leaf(3)]),
        "relu": (lambda x: weighted(T.relu(x)), [leaf(3, 4, kink_safe=True)]),
        "sigmoid": (lambda x: weighted(T.sigmoid(x)), [leaf(3, 4)]),
        "log": (lambda x: weighted(T.log(x)), [leaf(3, 4, positive=True)]),
        "exp": (lambda x: weighted(T.exp(x)), [leaf(3, 4)]),
        "softmax": (lambda x: weighted(T.softmax(x, axis=-1)), [leaf(3, 5)]),
        "layer_norm": (lambda x, g, b: weighted(T.layer_norm(x, g, b, 1e-5)),
                       [leaf(2, 3, 6), leaf(6), leaf(6)]),
        "resize_up": (lambda x: weighted(T.resize(x, (8, 6), "bilinear_up")), [leaf(1, 2, 4, 3)]),
        "resize_down": (lambda x: weighted(T.resize(x, (2, 3), "avg_down")), [leaf(1, 2, 4, 6)]),
        "concat": (lambda a, b: weighted(T.concat([a, b], axis=1)), [leaf(1, 2, 3, 3), leaf(1, 3, 3, 3)]),
        "reduce_sum": (lambda x: weighted(T.reduce("sum", x, (1, 2))), [leaf(2, 3, 4)]),
        "reduce_mean": (lambda x: weighted(T.reduce("mean", x, (0, 2))), [leaf(2, 3, 4)]),
        "reduce_max": (lambda x: weighted(T.reduce("max", x, (1,))), [leaf(2, 5, 3)]),
        "reshape": (lambda x: weighted(T.reshape(x, (4, 3))), [leaf(2, 6)]),
        "transpose": (lambda x: weighted(T.transpose(x, (2, 0, 1))), [leaf(2, 3, 4)]),
        "expand": (lambda x: weighted(T.expand(x, (2, 3, 4))), [leaf(2, 1, 4)]),
    }


def pipeline_case(seed: int, config=None):
    """Toy network + PPA loss on one random RGB-D sample, as (fn, params, model)."""
    from .config import Config
    from .data import synth_sample
    from .loss import total_loss
    from .model import GroupTransNet

    config = config or Config.for_profile("toy", seed=seed)
    model = GroupTransNet(config)
    rng = np.random.default_rng([seed, 7])
    sample = synth_sample(rng, config.input_size)
    rgb, depth = Tensor(sample.rgb[None]), Tensor(sample.depth[None])
    gt = sample.gt[None]

    def fn(*_):
        return total_loss(model(rgb, depth).maps, gt, config.ppa_window)

    return fn, model.parameters(), model


def run_suite(seed: int = 0, pipeline_samples: int = 50, tol: float = 1e-4,
              faults: Sequence[str] = ()) -> list[tuple[str, GradCheckReport]]:
    """Primitive probes at eps 1e-5, then 50 random parameter elements of the whole network at eps 1e-4."""
    from .tensor import inject_fault

    rng = np.random.default_rng(seed)
    results = []
    with inject_fault(*faults):
        for name, (fn, inputs) in primitive_cases(rng).items():
            results.append((name, grad_check(fn, inputs, eps=1e-5, tol=tol)))
        fn, params, _ = pipeline_case(seed)
        pick = rng.choice(len(params), size=pipeline_samples, replace=True)
        chosen = [params[i] for i in sorted(set(pick.tolist()))]
        counts = np.bincount(pick, minlength=len(params))
        report = GradCheckReport(tol=tol)
        full = grad_check(fn, chosen, eps=1e-4, tol=tol, samples=int(counts.max()), rng=rng)
        report.errors, report.worst_index = full.errors, full.worst_index
        report.checked, report.skipped = full.checked, full.skipped
        results.append(("pipeline", report))
    return results
