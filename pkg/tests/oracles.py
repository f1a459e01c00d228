"""Independent reference implementations written as plain Python loops.

Nothing here imports the package under test; every value is recomputed
pixel by pixel so the vectorised code is checked against a different
derivation, not a copy of itself.
"""
from __future__ import annotations

import math

EPS = 1e-12


def _flat(a):
    return [float(v) for v in a.reshape(-1)]


# ---------------------------------------------------------------- tensor ops

def matmul(a, b):
    m, k = a.shape
    n = b.shape[1]
    out = [[0.0] * n for _ in range(m)]
    for i in range(m):
        for j in range(n):
            s = 0.0
            for t in range(k):
                s += float(a[i, t]) * float(b[t, j])
            out[i][j] = s
    return out


def conv2d(x, w, b, stride, pad):
    n, c, h, wd = x.shape
    o, _, k, _ = w.shape
    oh = (h + 2 * pad - k) // stride + 1
    ow = (wd + 2 * pad - k) // stride + 1
    out = [[[[0.0] * ow for _ in range(oh)] for _ in range(o)] for _ in range(n)]
    for bi in range(n):
        for oc in range(o):
            for i in range(oh):
                for j in range(ow):
                    s = float(b[oc]) if b is not None else 0.0
                    for ic in range(c):
                        for di in range(k):
                            for dj in range(k):
                                r, q = i * stride + di - pad, j * stride + dj - pad
                                if 0 <= r < h and 0 <= q < wd:
                                    s += float(x[bi, ic, r, q]) * float(w[oc, ic, di, dj])
                    out[bi][oc][i][j] = s
    return out


def bilinear(img, th, tw):
    """Half-pixel (align-corners=false) bilinear resize of a 2-D list/array."""
    h, w = len(img), len(img[0])

    def taps(dst, src, size):
        pos = max((dst + 0.5) * src / size - 0.5, 0.0)
        lo = min(int(math.floor(pos)), src - 1)
        hi = min(lo + 1, src - 1)
        return lo, hi, pos - lo

    out = []
    for i in range(th):
        r0, r1, fr = taps(i, h, th)
        row = []
        for j in range(tw):
            c0, c1, fc = taps(j, w, tw)
            top = (1 - fc) * float(img[r0][c0]) + fc * float(img[r0][c1])
            bot = (1 - fc) * float(img[r1][c0]) + fc * float(img[r1][c1])
            row.append((1 - fr) * top + fr * bot)
        out.append(row)
    return out


# ---------------------------------------------------------------- loss

def ppa_loss(s, g, window):
    """Single H x W map: wBCE + wIoU with in-bounds k x k mean for the boundary weight."""
    h, w = g.shape
    r = window // 2
    num_bce = den = inter = union = 0.0
    for i in range(h):
        for j in range(w):
            tot, cnt = 0.0, 0
            for a in range(i - r, i + r + 1):
                for b in range(j - r, j + r + 1):
                    if 0 <= a < h and 0 <= b < w:
                        tot += float(g[a, b])
                        cnt += 1
            gij = float(g[i, j])
            omega = 1.0 + 5.0 * abs(tot / cnt - gij)
            p = float(s[i, j])
            pc = min(max(p, 1e-7), 1.0 - 1e-7)
            num_bce += omega * -(gij * math.log(pc) + (1.0 - gij) * math.log(1.0 - pc))
            den += omega
            inter += omega * p * gij
            union += omega * (p + gij - p * gij)
    return num_bce / den + 1.0 - (inter + 1.0) / (union + 1.0)


# ---------------------------------------------------------------- metrics

def mae(p, g):
    pv, gv = _flat(p), _flat(g)
    return sum(abs(a - b) for a, b in zip(pv, gv)) / len(pv)


def pr_f_curves(p, g):
    pv, gv = _flat(p), [v > 0.5 for v in _flat(g)]
    # bucket each pixel by how many thresholds k/255 it exceeds
    pos_hist = [0] * 257
    tp_hist = [0] * 257
    for v, t in zip(pv, gv):
        k = 0
        while k < 256 and v > k / 255.0:
            k += 1
        pos_hist[k] += 1
        tp_hist[k] += t
    n_true = sum(gv)
    prec, rec, f = [], [], []
    for thr in range(256):
        positives = sum(pos_hist[thr + 1:])
        tp = sum(tp_hist[thr + 1:])
        pr = tp / (positives + EPS)
        rc = tp / (n_true + EPS)
        prec.append(pr)
        rec.append(rc)
        f.append(1.3 * pr * rc / (0.3 * pr + rc + EPS))
    return prec, rec, f


def f_measure_avg(p, g):
    return sum(pr_f_curves(p, g)[2]) / 256.0


def e_measure(p, g):
    pv, gv = _flat(p), [1.0 if v > 0.5 else 0.0 for v in _flat(g)]
    n = len(pv)
    thr = min(2.0 * sum(pv) / n, 1.0)
    pb = [1.0 if v >= thr and v > 0 else 0.0 for v in pv]
    mg, mp = sum(gv) / n, sum(pb) / n
    if mg == 0.0:
        return 1.0 - mp
    if mg == 1.0:
        return mp
    total = 0.0
    for a, b in zip(gv, pb):
        fg, fp = a - mg, b - mp
        xi = 2.0 * fg * fp / (fg * fg + fp * fp + EPS)
        total += (1.0 + xi) ** 2 / 4.0
    return total / n


def _object(values):
    if not values:
        return 0.0
    m = sum(values) / len(values)
    var = sum((v - m) ** 2 for v in values) / len(values)
    return 2.0 * m / (m * m + 1.0 + math.sqrt(var) + EPS)


def _ssim(pv, gv):
    n = len(pv)
    x, y = sum(pv) / n, sum(gv) / n
    sx = sum((a - x) ** 2 for a in pv) / (n - 1 + EPS)
    sy = sum((b - y) ** 2 for b in gv) / (n - 1 + EPS)
    sxy = sum((a - x) * (b - y) for a, b in zip(pv, gv)) / (n - 1 + EPS)
    alpha = 4.0 * x * y * sxy
    beta = (x * x + y * y) * (sx + sy)
    if alpha != 0:
        return alpha / (beta + EPS)
    return 1.0 if beta == 0 else 0.0


def s_measure(p, g):
    h, w = g.shape
    gb = [[float(g[i, j]) > 0.5 for j in range(w)] for i in range(h)]
    pv = [[float(p[i, j]) for j in range(w)] for i in range(h)]
    fg_count = sum(sum(row) for row in gb)
    if fg_count == 0:
        return 1.0 - sum(sum(row) for row in pv) / (h * w)
    if fg_count == h * w:
        return sum(sum(row) for row in pv) / (h * w)
    mu = fg_count / (h * w)
    fg = [pv[i][j] for i in range(h) for j in range(w) if gb[i][j]]
    bg = [1.0 - pv[i][j] for i in range(h) for j in range(w) if not gb[i][j]]
    s_o = mu * _object(fg) + (1.0 - mu) * _object(bg)

    sum_r = sum(i for i in range(h) for j in range(w) if gb[i][j])
    sum_c = sum(j for i in range(h) for j in range(w) if gb[i][j])
    cy = int(round(sum_r / fg_count)) + 1
    cx = int(round(sum_c / fg_count)) + 1
    s_r = 0.0
    for r0, r1 in ((0, cy), (cy, h)):
        for c0, c1 in ((0, cx), (cx, w)):
            if r1 <= r0 or c1 <= c0:
                continue
            pr = [pv[i][j] for i in range(r0, r1) for j in range(c0, c1)]
            gr = [1.0 if gb[i][j] else 0.0 for i in range(r0, r1) for j in range(c0, c1)]
            s_r += len(pr) / (h * w) * _ssim(pr, gr)
    return max(0.5 * s_o + 0.5 * s_r, 0.0)
