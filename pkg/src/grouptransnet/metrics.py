"""Saliency evaluation: S-measure, mean F-measure, E-measure, MAE, PR and F curves.

Predictions are maps in [0, 1]; ground truth is binary. Thresholds for the
curves are the 256 values k/255, and a pixel is positive when strictly above
the threshold.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import DataError, list_maps, read_pnm, to_unit

EPS = 1e-12
BETA2 = 0.3
ALPHA = 0.5
THRESHOLDS = np.arange(256) / 255.0


def _pair(pred, gt) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64) > 0.5
    if p.shape != g.shape:
        raise ValueError(f"prediction {p.shape} and ground truth {g.shape} differ in size")
    return p, g


def mae(pred, gt) -> float:
    p, g = _pair(pred, gt)
    return float(np.abs(p - g).mean())


def pr_curve(pred, gt) -> tuple[np.ndarray, np.ndarray]:
    """Precision and recall at each of the 256 thresholds."""
    p, g = _pair(pred, gt)
    pos = p.reshape(-1)[None, :] > THRESHOLDS[:, None]
    gv = g.reshape(-1)
    tp = (pos & gv).sum(axis=1)
    fp = (pos & ~gv).sum(axis=1)
    fn = gv.sum() - tp
    return tp / (tp + fp + EPS), tp / (tp + fn + EPS)


def f_beta(precision, recall):
    return (1 + BETA2) * precision * recall / (BETA2 * precision + recall + EPS)


def f_curve(pred, gt) -> np.ndarray:
    return f_beta(*pr_curve(pred, gt))


def f_measure_avg(pred, gt, adaptive: bool = False) -> float:
    """Mean F over the 256 thresholds, or F at threshold min(2 mean(P), 1) when ``adaptive``."""
    if not adaptive:
        return float(f_curve(pred, gt).mean())
    p, g = _pair(pred, gt)
    pos = p >= min(2.0 * p.mean(), 1.0)
    tp = (pos & g).sum()
    precision = tp / (pos.sum() + EPS)
    recall = tp / (g.sum() + EPS)
    return float(f_beta(precision, recall))


# ---------------------------------------------------------------- S-measure

def _object_score(x: np.ndarray) -> float:
    if x.size == 0:
        return 0.0
    mean = x.mean()
    return float(2.0 * mean / (mean * mean + 1.0 + x.std() + EPS))


def _object_similarity(p: np.ndarray, g: np.ndarray) -> float:
    fg = p[g]
    bg = 1.0 - p[~g]
    mu = g.mean()
    return mu * _object_score(fg) + (1.0 - mu) * _object_score(bg)


def _ssim(p: np.ndarray, g: np.ndarray) -> float:
    n = p.size
    x, y = p.mean(), g.mean()
    sx = ((p - x) ** 2).sum() / (n - 1 + EPS)
    sy = ((g - y) ** 2).sum() / (n - 1 + EPS)
    sxy = ((p - x) * (g - y)).sum() / (n - 1 + EPS)
    a = 4.0 * x * y * sxy
    b = (x * x + y * y) * (sx + sy)
    if a != 0:
        return float(a / (b + EPS))
    return 1.0 if b == 0 else 0.0


def _region_similarity(p: np.ndarray, g: np.ndarray) -> float:
    h, w = g.shape
    rows, cols = np.nonzero(g)
    cy = int(round(rows.mean())) + 1
    cx = int(round(cols.mean())) + 1
    total = 0.0
    for rs, cs in ((slice(0, cy), slice(0, cx)), (slice(0, cy), slice(cx, w)),
                   (slice(cy, h), slice(0, cx)), (slice(cy, h), slice(cx, w))):
        region = g[rs, cs]
        if region.size == 0:
            continue
        total += region.size / (h * w) * _ssim(p[rs, cs], region.astype(np.float64))
    return total


def s_measure(pred, gt, alpha: float = ALPHA) -> float:
    p, g = _pair(pred, gt)
    if p.ndim != 2:
        p, g = p.reshape(p.shape[-2:]), g.reshape(g.shape[-2:])
    y = g.mean()
    if y == 0:
        return float(1.0 - p.mean())
    if y == 1:
        return float(p.mean())
    score = alpha * _object_similarity(p, g) + (1.0 - alpha) * _region_similarity(p, g)
    return float(max(score, 0.0))


# ---------------------------------------------------------------- E-measure

def e_measure(pred, gt, binarized: bool = False) -> float:
    """Enhanced alignment of ``pred`` (binarised at min(2 mean, 1) unless already binary) with ``gt``."""
    p, g = _pair(pred, gt)
    # an all-zero map has threshold 0; requiring p > 0 keeps it empty instead of all-positive
    pb = p > 0.5 if binarized else (p >= min(2.0 * p.mean(), 1.0)) & (p > 0)
    pb = pb.astype(np.float64)
    gf = g.astype(np.float64)
    y = gf.mean()
    if y == 0:
        return float((1.0 - pb).mean())
    if y == 1:
        return float(pb.mean())
    phi_g = gf - y
    phi_p = pb - pb.mean()
    xi = 2.0 * phi_g * phi_p / (phi_g * phi_g + phi_p * phi_p + EPS)
    return float(((1.0 + xi) ** 2 / 4.0).mean())


# ---------------------------------------------------------------- reports

@dataclass
class MetricReport:
    s_alpha: float
    f_beta_avg: float
    e_xi: float
    mae: float
    precision: np.ndarray = field(repr=False)
    recall: np.ndarray = field(repr=False)
    f_curve: np.ndarray = field(repr=False)
    images: int = 1

    @property
    def pr_curve(self) -> list[tuple[float, float]]:
        return list(zip(self.precision.tolist(), self.recall.tolist()))

    def to_text(self) -> str:
        lines = [f"images={self.images}", f"s_alpha={float(self.s_alpha)!r}",
                 f"f_beta_avg={float(self.f_beta_avg)!r}", f"e_xi={float(self.e_xi)!r}",
                 f"mae={float(self.mae)!r}", "",
                 "threshold precision recall f_beta"]
        for k in range(256):
            row = (float(self.precision[k]), float(self.recall[k]), float(self.f_curve[k]))
            lines.append(f"{k} {row[0]!r} {row[1]!r} {row[2]!r}")
        return "\n".join(lines) + "\n"


def parse_report(text: str) -> MetricReport:
    scalars: dict[str, str] = {}
    rows = []
    for line in text.splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            scalars[key.strip()] = value.strip()
        elif line and line[0].isdigit():
            rows.append([float(v) for v in line.split()[1:]])
    curve = np.array(rows)
    return MetricReport(float(scalars["s_alpha"]), float(scalars["f_beta_avg"]), float(scalars["e_xi"]),
                        float(scalars["mae"]), curve[:, 0], curve[:, 1], curve[:, 2],
                        int(scalars.get("images", 1)))


def evaluate_pair(pred, gt, adaptive_f: bool = False) -> MetricReport:
    precision, recall = pr_curve(pred, gt)
    return MetricReport(s_measure(pred, gt), f_measure_avg(pred, gt, adaptive_f), e_measure(pred, gt),
                        mae(pred, gt), precision, recall, f_beta(precision, recall))


def mean_report(reports: list[MetricReport]) -> MetricReport:
    if not reports:
        raise ValueError("mean_report: no reports")
    return MetricReport(
        float(np.mean([r.s_alpha for r in reports])), float(np.mean([r.f_beta_avg for r in reports])),
        float(np.mean([r.e_xi for r in reports])), float(np.mean([r.mae for r in reports])),
        np.mean([r.precision for r in reports], axis=0), np.mean([r.recall for r in reports], axis=0),
        np.mean([r.f_curve for r in reports], axis=0), len(reports))


def _read_map(path: Path) -> np.ndarray:
    raw, maxval = read_pnm(path)
    if raw.ndim != 2:
        raise DataError(f"{path}: expected a single-channel P5 map")
    return to_unit(raw, maxval)


def evaluate_dir(pred_dir, gt_dir, adaptive_f: bool = False) -> MetricReport:
    preds, gts = list_maps(pred_dir), list_maps(gt_dir)
    orphans = sorted(set(preds) ^ set(gts))
    if orphans:
        side = "prediction" if orphans[0] in preds else "ground truth"
        raise DataError(f"unmatched {side} file: {orphans[0]}")
    if not preds:
        raise DataError(f"no maps found in {pred_dir}")
    reports = []
    for name in sorted(preds):
        p, g = _read_map(preds[name]), _read_map(gts[name]) > 0.5
        if p.shape != g.shape:
            raise DataError(f"size mismatch for {name}: prediction {p.shape} vs ground truth {g.shape}")
        reports.append(evaluate_pair(p, g, adaptive_f))
    return mean_report(reports)
