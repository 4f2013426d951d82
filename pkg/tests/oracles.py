"""Independent brute-force oracles, written as plain Python loops.

These deliberately avoid the package's vectorized code paths (and each
other) so that agreement with the library is a real cross-check, not a
tautology.
"""

import math
import sys

import numpy as np

EPS = sys.float_info.epsilon


def conv2d_same_loop(x, kernel):
    """Scalar zero-padded 2-D convolution (kernel flipped)."""
    h, w = x.shape
    side = kernel.shape[0]
    half = side // 2
    out = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            acc = 0.0
            for a in range(side):
                for b in range(side):
                    ii = i - (a - half)
                    jj = j - (b - half)
                    if 0 <= ii < h and 0 <= jj < w:
                        acc += x[ii, jj] * kernel[a, b]
            out[i, j] = acc
    return out


def correlate2d_same_loop(x, kernel):
    """Scalar zero-padded 2-D correlation (no kernel flip)."""
    h, w = x.shape
    side = kernel.shape[0]
    half = side // 2
    out = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            acc = 0.0
            for a in range(side):
                for b in range(side):
                    ii = i + (a - half)
                    jj = j + (b - half)
                    if 0 <= ii < h and 0 <= jj < w:
                        acc += x[ii, jj] * kernel[a, b]
            out[i, j] = acc
    return out


def conv2d_mc_loop(x, weights, bias=None):
    """Scalar multi-channel correlation-style conv layer, same zero padding."""
    c_out, c_in, side, _ = weights.shape
    _, h, w = x.shape
    half = side // 2
    out = np.zeros((c_out, h, w))
    for co in range(c_out):
        for i in range(h):
            for j in range(w):
                acc = 0.0 if bias is None else float(bias[co])
                for ci in range(c_in):
                    for a in range(side):
                        for b in range(side):
                            ii = i + a - half
                            jj = j + b - half
                            if 0 <= ii < h and 0 <= jj < w:
                                acc += x[ci, ii, jj] * weights[co, ci, a, b]
                out[co, i, j] = acc
    return out


def sacloss_loop(fusion, surround, obj, background, margin, pull_background=True):
    """Double-loop contrastive loss over explicit flat index lists."""
    c, h, w = fusion.shape
    feats = [fusion[:, i // w, i % w] for i in range(h * w)]

    def dist(a, b):
        return math.sqrt(sum((float(x) - float(y)) ** 2 for x, y in zip(a, b)))

    sum_sb = 0.0
    for s in surround:
        for b in background:
            sum_sb += dist(feats[s], feats[b])
    sum_sc = 0.0
    for s in surround:
        for cc in obj:
            sum_sc += dist(feats[s], feats[cc])
    mean_sb = sum_sb / (len(surround) * len(background))
    mean_sc = sum_sc / (len(surround) * len(obj))
    if pull_background:
        return max(0.0, mean_sb - mean_sc + margin)
    return -mean_sb + mean_sc + margin


def scct_forward_loop(x, k):
    """Element-by-element stride separation with row-major part order."""
    s = 5 - k
    c, h, w = x.shape
    out = np.zeros((c * s * s, h // s, w // s))
    for ci in range(c):
        for i in range(h):
            for j in range(w):
                part = (i % s) * s + (j % s)
                out[part * c + ci, i // s, j // s] = x[ci, i, j]
    return out


def _gauss7_sigma5():
    k = np.zeros((7, 7))
    for a in range(7):
        for b in range(7):
            k[a, b] = math.exp(-((a - 3) ** 2 + (b - 3) ** 2) / (2.0 * 25.0))
    return k / k.sum()


def weighted_fmeasure_loop(pred, gt, beta2=1.0):
    """Plain-loop dependency-weighted F-measure (row-major nearest on ties)."""
    h, w = gt.shape
    n_fg = int(gt.sum())
    if n_fg == 0:
        return float("nan")
    fg_coords = [(i, j) for i in range(h) for j in range(w) if gt[i, j] == 1.0]

    err = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            err[i, j] = abs(pred[i, j] - gt[i, j])

    err_t = err.copy()
    dist_map = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            if gt[i, j] == 1.0:
                continue
            best_d2 = None
            best = None
            for (fi, fj) in fg_coords:  # row-major scan; first minimum wins
                d2 = (i - fi) ** 2 + (j - fj) ** 2
                if best_d2 is None or d2 < best_d2:
                    best_d2 = d2
                    best = (fi, fj)
            err_t[i, j] = err[best[0], best[1]]
            dist_map[i, j] = math.sqrt(best_d2)

    err_a = correlate2d_same_loop(err_t, _gauss7_sigma5())
    min_e_ea = err.copy()
    for i in range(h):
        for j in range(w):
            if gt[i, j] == 1.0 and err_a[i, j] < err[i, j]:
                min_e_ea[i, j] = err_a[i, j]

    weight = np.ones((h, w))
    for i in range(h):
        for j in range(w):
            if gt[i, j] == 0.0:
                weight[i, j] = 2.0 - math.exp(math.log(0.5) / 5.0 * dist_map[i, j])

    err_w = min_e_ea * weight
    fg_sum = sum(err_w[i, j] for i in range(h) for j in range(w) if gt[i, j] == 1.0)
    bg_sum = sum(err_w[i, j] for i in range(h) for j in range(w) if gt[i, j] == 0.0)
    tp_w = n_fg - fg_sum
    recall = 1.0 - fg_sum / n_fg
    precision = tp_w / (EPS + tp_w + bg_sum)
    return (1.0 + beta2) * precision * recall / (EPS + beta2 * precision + recall)


def _object_score_loop(values):
    n = len(values)
    if n == 0:
        return 0.0
    m = sum(values) / n
    var = sum((v - m) ** 2 for v in values) / n
    return 2.0 * m / (m * m + 1.0 + math.sqrt(var) + EPS)


def _ssim_loop(p, g):
    n = p.size
    if n == 0:
        return 0.0
    x = sum(p.ravel()) / n
    y = sum(g.ravel()) / n
    sig_x = sum((v - x) ** 2 for v in p.ravel()) / (n - 1 + EPS)
    sig_y = sum((v - y) ** 2 for v in g.ravel()) / (n - 1 + EPS)
    sig_xy = sum((a - x) * (b - y) for a, b in zip(p.ravel(), g.ravel())) / (n - 1 + EPS)
    num = 4.0 * x * y * sig_xy
    den = (x * x + y * y) * (sig_x + sig_y)
    if num != 0.0:
        return num / (den + EPS)
    if den == 0.0:
        return 1.0
    return 0.0


def s_measure_loop(pred, gt, alpha=0.5):
    h, w = gt.shape
    total = gt.sum()
    y = total / gt.size
    if y == 0.0:
        return 1.0 - pred.mean()
    if y == 1.0:
        return pred.mean()

    fg_vals = [pred[i, j] for i in range(h) for j in range(w) if gt[i, j] == 1.0]
    bg_vals = [1.0 - pred[i, j] for i in range(h) for j in range(w) if gt[i, j] == 0.0]
    s_obj = y * _object_score_loop(fg_vals) + (1.0 - y) * _object_score_loop(bg_vals)

    cy = round(sum(i * gt[i, j] for i in range(h) for j in range(w)) / total)
    cx = round(sum(j * gt[i, j] for i in range(h) for j in range(w)) / total)
    area = h * w
    w1 = cx * cy / area
    w2 = (w - cx) * cy / area
    w3 = cx * (h - cy) / area
    w4 = 1.0 - w1 - w2 - w3
    q1 = _ssim_loop(pred[:cy, :cx], gt[:cy, :cx])
    q2 = _ssim_loop(pred[:cy, cx:], gt[:cy, cx:])
    q3 = _ssim_loop(pred[cy:, :cx], gt[cy:, :cx])
    q4 = _ssim_loop(pred[cy:, cx:], gt[cy:, cx:])
    s_reg = w1 * q1 + w2 * q2 + w3 * q3 + w4 * q4
    return max(alpha * s_obj + (1.0 - alpha) * s_reg, 0.0)


def e_measure_loop(pred, gt):
    h, w = gt.shape
    threshold = min(2.0 * pred.mean(), 1.0)
    dm = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            dm[i, j] = 1.0 if pred[i, j] >= threshold else 0.0
    y = gt.mean()
    if y == 0.0:
        enhanced = 1.0 - dm
    elif y == 1.0:
        enhanced = dm
    else:
        mu_d = dm.mean()
        enhanced = np.zeros((h, w))
        for i in range(h):
            for j in range(w):
                pg = gt[i, j] - y
                po = dm[i, j] - mu_d
                align = 2.0 * pg * po / (pg * pg + po * po + EPS)
                enhanced[i, j] = (align + 1.0) ** 2 / 4.0
    return enhanced.mean()
