"""Segmentation quality metrics for soft prediction maps vs binary masks.

The four scores follow their standard published constructions:

* ``mae`` -- mean absolute error between the map and the mask.
* ``weighted_fmeasure`` -- precision/recall on a dependency-weighted error
  map: background errors are copied from their nearest foreground pixel
  and smoothed with a 7x7 Gaussian (sigma 5), foreground errors keep the
  smaller of raw/smoothed, and background errors are amplified by a
  distance-decay weight before TP/FP/FN aggregation.
* ``s_measure`` -- alpha-blend of an object-aware score (foreground and
  inverted-background mean/std statistics) and a region-aware score
  (SSIM-style block scores on the four quadrants split at the mask
  centroid).
* ``e_measure`` -- mean of the enhanced alignment map between the
  mean-centred binarized prediction (adaptive threshold = twice the map
  mean, clipped to 1) and the mean-centred mask.

``bce_loss`` is the pixel-mean binary cross-entropy used by the training
losses (predictions clamped to [1e-7, 1 - 1e-7]).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import as_mask, as_softmap, convolve2d_same
from .errors import DimensionError
from .io import read_gray

_EPS = np.finfo(np.float64).eps
_BCE_CLAMP = 1e-7

__all__ = [
    "mae",
    "bce_loss",
    "weighted_fmeasure",
    "s_measure",
    "e_measure",
    "ImageScores",
    "MetricReport",
    "evaluate_batch",
]


def _check_pair(o, gt):
    pred = as_softmap(o, "prediction")
    mask = as_mask(gt, "gt")
    if pred.shape != mask.shape:
        raise DimensionError(f"prediction shape {pred.shape} != gt shape {mask.shape}")
    return pred, mask


def mae(o, gt) -> float:
    """Mean absolute difference between a prediction map and a binary mask."""
    pred, mask = _check_pair(o, gt)
    return float(np.abs(pred - mask).mean())


def bce_loss(o, gt) -> float:
    """Pixel-mean binary cross-entropy with the prediction clamped away from {0, 1}."""
    pred, mask = _check_pair(o, gt)
    p = np.clip(pred, _BCE_CLAMP, 1.0 - _BCE_CLAMP)
    return float(-(mask * np.log(p) + (1.0 - mask) * np.log(1.0 - p)).mean())


def _matlab_gauss(side: int, sigma: float) -> np.ndarray:
    half = (side - 1) / 2.0
    ax = np.arange(-half, half + 1)
    g = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2.0 * sigma * sigma))
    return g / g.sum()


def _nearest_foreground(mask: np.ndarray):
    """Per background pixel: distance to and flat index of the nearest
    foreground pixel (row-major first on ties)."""
    flat = mask.ravel()
    fg_idx = np.flatnonzero(flat == 1.0)
    bg_idx = np.flatnonzero(flat == 0.0)
    fg_rc = np.column_stack(np.unravel_index(fg_idx, mask.shape)).astype(np.float64)
    bg_rc = np.column_stack(np.unravel_index(bg_idx, mask.shape)).astype(np.float64)
    nearest = np.empty(bg_idx.size, dtype=np.intp)
    dist = np.empty(bg_idx.size, dtype=np.float64)
    chunk = 1024
    for start in range(0, bg_idx.size, chunk):
        sl = slice(start, start + chunk)
        d2 = ((bg_rc[sl, None, :] - fg_rc[None, :, :]) ** 2).sum(axis=2)
        j = d2.argmin(axis=1)
        nearest[sl] = fg_idx[j]
        dist[sl] = np.sqrt(d2[np.arange(j.size), j])
    return bg_idx, nearest, dist


def weighted_fmeasure(o, gt, beta2: float = 1.0) -> float:
    """Dependency-weighted F-measure; NaN sentinel when the mask is empty."""
    pred, mask = _check_pair(o, gt)
    if mask.sum() == 0:
        return float("nan")
    fg = mask == 1.0
    err = np.abs(pred - mask)
    bg_idx, nearest, dist = _nearest_foreground(mask)
    err_t = err.copy()
    err_t.ravel()[bg_idx] = err.ravel()[nearest]
    err_a = convolve2d_same(err_t, _matlab_gauss(7, 5.0))
    min_e_ea = err.copy()
    swap = fg & (err_a < err)
    min_e_ea[swap] = err_a[swap]
    weight = np.ones_like(mask)
    weight.ravel()[bg_idx] = 2.0 - np.exp(math.log(0.5) / 5.0 * dist)
    err_w = min_e_ea * weight
    n_fg = float(mask.sum())
    tp_w = n_fg - float(err_w[fg].sum())
    fp_w = float(err_w[~fg].sum())
    recall = 1.0 - float(err_w[fg].mean())
    precision = tp_w / (_EPS + tp_w + fp_w)
    return float((1.0 + beta2) * precision * recall / (_EPS + beta2 * precision + recall))


def _object_score(values: np.ndarray) -> float:
    if values.size == 0:
        return 0.0
    m = float(values.mean())
    s = float(values.std())
    return 2.0 * m / (m * m + 1.0 + s + _EPS)


def _ssim_block(p: np.ndarray, g: np.ndarray) -> float:
    n = p.size
    if n == 0:
        return 0.0
    x = float(p.mean())
    y = float(g.mean())
    sig_x = float(((p - x) ** 2).sum()) / (n - 1 + _EPS)
    sig_y = float(((g - y) ** 2).sum()) / (n - 1 + _EPS)
    sig_xy = float(((p - x) * (g - y)).sum()) / (n - 1 + _EPS)
    num = 4.0 * x * y * sig_xy
    den = (x * x + y * y) * (sig_x + sig_y)
    if num != 0.0:
        return num / (den + _EPS)
    if den == 0.0:
        return 1.0
    return 0.0


def _centroid(mask: np.ndarray):
    h, w = mask.shape
    total = mask.sum()
    if total == 0:
        return h // 2, w // 2
    ys = np.arange(h, dtype=np.float64)
    xs = np.arange(w, dtype=np.float64)
    cy = int(round(float((mask.sum(axis=1) * ys).sum() / total)))
    cx = int(round(float((mask.sum(axis=0) * xs).sum() / total)))
    return cy, cx


def _s_region(pred: np.ndarray, mask: np.ndarray) -> float:
    h, w = mask.shape
    cy, cx = _centroid(mask)
    area = float(h * w)
    w1 = cx * cy / area
    w2 = (w - cx) * cy / area
    w3 = cx * (h - cy) / area
    weights = (w1, w2, w3, 1.0 - w1 - w2 - w3)
    blocks = (
        (pred[:cy, :cx], mask[:cy, :cx]),
        (pred[:cy, cx:], mask[:cy, cx:]),
        (pred[cy:, :cx], mask[cy:, :cx]),
        (pred[cy:, cx:], mask[cy:, cx:]),
    )
    return float(sum(wt * _ssim_block(p, g) for wt, (p, g) in zip(weights, blocks)))


def _s_object(pred: np.ndarray, mask: np.ndarray) -> float:
    fg_score = _object_score(pred[mask == 1.0])
    bg_score = _object_score(1.0 - pred[mask == 0.0])
    u = float(mask.mean())
    return u * fg_score + (1.0 - u) * bg_score


def s_measure(o, gt, alpha: float = 0.5) -> float:
    """Structural similarity score; degenerate masks use the mean-based fallback."""
    pred, mask = _check_pair(o, gt)
    y = float(mask.mean())
    if y == 0.0:
        return float(1.0 - pred.mean())
    if y == 1.0:
        return float(pred.mean())
    score = alpha * _s_object(pred, mask) + (1.0 - alpha) * _s_region(pred, mask)
    return float(max(score, 0.0))


def e_measure(o, gt) -> float:
    """Enhanced alignment score on the adaptively binarized prediction."""
    pred, mask = _check_pair(o, gt)
    threshold = min(2.0 * float(pred.mean()), 1.0)
    dm = (pred >= threshold).astype(np.float64)
    y = float(mask.mean())
    if y == 0.0:
        enhanced = 1.0 - dm
    elif y == 1.0:
        enhanced = dm
    else:
        phi_g = mask - y
        phi_o = dm - dm.mean()
        align = 2.0 * phi_g * phi_o / (phi_g * phi_g + phi_o * phi_o + _EPS)
        enhanced = (align + 1.0) ** 2 / 4.0
    return float(enhanced.mean())


@dataclass(frozen=True)
class ImageScores:
    stem: str
    s_alpha: float
    f_wbeta: float
    mae: float
    e_phi: float


@dataclass
class MetricReport:
    """Per-image scores, dataset means, and stems that had no counterpart."""

    rows: list
    means: ImageScores | None
    unmatched: list

    def to_csv_text(self) -> str:
        lines = ["stem,s_alpha,f_wbeta,mae,e_phi"]
        entries = list(self.rows) + ([self.means] if self.means else [])
        for r in entries:
            lines.append(f"{r.stem},{r.s_alpha:.6f},{r.f_wbeta:.6f},{r.mae:.6f},{r.e_phi:.6f}")
        return "\n".join(lines) + "\n"

    def to_json_obj(self) -> dict:
        def row(r):
            return {
                "stem": r.stem,
                "s_alpha": r.s_alpha,
                "f_wbeta": r.f_wbeta,
                "mae": r.mae,
                "e_phi": r.e_phi,
            }

        return {
            "images": [row(r) for r in self.rows],
            "means": row(self.means) if self.means else None,
            "unmatched": list(self.unmatched),
        }


def score_pair(pred_map, gt_mask, stem: str = "") -> ImageScores:
    """All four metrics for one prediction/mask pair."""
    return ImageScores(
        stem=stem,
        s_alpha=s_measure(pred_map, gt_mask),
        f_wbeta=weighted_fmeasure(pred_map, gt_mask),
        mae=mae(pred_map, gt_mask),
        e_phi=e_measure(pred_map, gt_mask),
    )


def _list_stems(directory: Path) -> dict:
    out = {}
    for path in sorted(directory.iterdir()):
        if path.suffix.lower() in (".png", ".pgm") and path.is_file():
            out[path.stem] = path
    return out


def _workers() -> int:
    return max(1, int(os.environ.get("SURROUND_COD_THREADS", "1")))


def evaluate_batch(pred_dir, gt_dir) -> MetricReport:
    """Score every matching filename stem in two directories.

    Predictions load as grayscale maps in [0, 1]; ground truths binarize
    at 0.5. Unmatched stems are listed and excluded from the means; an
    undefined weighted F-measure (empty mask) is skipped by its mean.
    """
    preds = _list_stems(Path(pred_dir))
    gts = _list_stems(Path(gt_dir))
    shared = sorted(set(preds) & set(gts))
    unmatched = sorted(set(preds) ^ set(gts))

    def one(stem: str) -> ImageScores:
        pred = read_gray(preds[stem])
        gt = (read_gray(gts[stem]) >= 0.5).astype(np.float64)
        return score_pair(pred, gt, stem)

    workers = _workers()
    if workers > 1 and len(shared) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, shared))
    else:
        rows = [one(stem) for stem in shared]

    means = None
    if rows:
        cols = {name: np.array([getattr(r, name) for r in rows]) for name in
                ("s_alpha", "f_wbeta", "mae", "e_phi")}
        means = ImageScores(
            stem="mean",
            s_alpha=float(cols["s_alpha"].mean()),
            f_wbeta=float(np.nanmean(cols["f_wbeta"])) if np.any(~np.isnan(cols["f_wbeta"])) else float("nan"),
            mae=float(cols["mae"].mean()),
            e_phi=float(cols["e_phi"].mean()),
        )
    return MetricReport(rows=rows, means=means, unmatched=unmatched)
