"""Surrounding-anchored contrastive loss over region partitions.

Pixels are split into three disjoint sets: the object C (ground truth 1),
the surrounding ring S (ground truth 0 with a surrounding-label value at
or above a threshold), and the remaining background B. Every surrounding
pixel acts as an anchor paired with every background pixel and every
object pixel; the loss aggregates the mean Euclidean feature distances of
the two pair families plus an additive margin.

Two sign conventions are provided:

* ``PULL_BACKGROUND`` (default): max(0, mean_dist(S,B) - mean_dist(S,C)
  + margin). Minimizing it pulls surrounding features toward background
  features and pushes them away from object features; the hinge clamps
  the loss at 0 once the separation exceeds the margin.
* ``PULL_OBJECT``: -mean_dist(S,B) + mean_dist(S,C) + margin, the exact
  mirrored form, kept as a switch for fidelity experiments.

Four sampling strategies control which layers and which pixels enter the
pair pool; the compressed strategy ("scct") runs the loss on the
stride-compacted map, shrinking the candidate pair space by stride**4
while every input pixel still contributes through the channel stacking.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import backend as _backend
from .core import as_mask, as_softmap, as_tensor3, downsample_avg, downsample_max
from .errors import DimensionError, ParameterError
from .scct import ScctLayout, scct_forward, scct_inverse
from .surround import SurroundingLabel

__all__ = [
    "SamplingMode",
    "SignConvention",
    "SacConfig",
    "RegionPartition",
    "partition_regions",
    "pair_distance",
    "sacloss_value",
    "sacloss_grad",
    "sacloss_breakdown",
    "sacloss_multi_layer",
    "sacloss_multi_layer_grad",
]


class SamplingMode(str, Enum):
    FULL_PAIRWISE = "full"
    HIGH_LAYER = "high"
    SUB_SAMPLE = "sub"
    SCCT = "scct"


class SignConvention(str, Enum):
    PULL_BACKGROUND = "pull-background"
    PULL_OBJECT = "pull-object"


@dataclass(frozen=True)
class SacConfig:
    margin: float = 0.0
    surround_threshold: float = 0.1
    mode: SamplingMode = SamplingMode.SCCT
    sign_convention: SignConvention = SignConvention.PULL_BACKGROUND

    def __post_init__(self):
        if self.margin < 0:
            raise ParameterError(f"margin must be >= 0, got {self.margin}")
        if not (0.0 < self.surround_threshold < 1.0):
            raise ParameterError(
                f"surround_threshold must lie in (0, 1), got {self.surround_threshold}"
            )


@dataclass(frozen=True)
class RegionPartition:
    """Disjoint flat pixel-index sets covering an (H, W) grid."""

    surround: np.ndarray = field(repr=False)
    obj: np.ndarray = field(repr=False)
    background: np.ndarray = field(repr=False)
    shape: tuple[int, int] = (0, 0)

    @property
    def n_s(self) -> int:
        return self.surround.size

    @property
    def n_c(self) -> int:
        return self.obj.size

    @property
    def n_b(self) -> int:
        return self.background.size

    @property
    def is_degenerate(self) -> bool:
        return self.n_s == 0 or self.n_c == 0 or self.n_b == 0


def _label_map(lm) -> np.ndarray:
    if isinstance(lm, SurroundingLabel):
        return lm.map
    return as_softmap(lm, "lm")


def partition_regions(gt, lm, threshold: float) -> RegionPartition:
    """Split pixels into object (gt = 1), surround (lm >= threshold), background.

    The partition may be degenerate (an empty set); the loss treats that
    case as undefined and skips it with a warning.
    """
    mask = as_mask(gt, "gt")
    halo = _label_map(lm)
    if mask.shape != halo.shape:
        raise DimensionError(f"gt shape {mask.shape} != lm shape {halo.shape}")
    flat_gt = mask.ravel()
    flat_lm = halo.ravel()
    obj = np.flatnonzero(flat_gt == 1.0).astype(np.int64)
    surround = np.flatnonzero((flat_gt == 0.0) & (flat_lm >= threshold)).astype(np.int64)
    bg = np.flatnonzero((flat_gt == 0.0) & (flat_lm < threshold)).astype(np.int64)
    return RegionPartition(surround=surround, obj=obj, background=bg, shape=mask.shape)


def pair_distance(f_i, f_j, positive: bool) -> float:
    """Euclidean distance between two feature vectors, negated for positive pairs."""
    a = np.asarray(f_i, dtype=np.float64).ravel()
    b = np.asarray(f_j, dtype=np.float64).ravel()
    if a.size != b.size:
        raise DimensionError(f"feature lengths differ: {a.size} vs {b.size}")
    d = float(np.linalg.norm(a - b))
    return -d if positive else d


def _pixel_features(fusion: np.ndarray) -> np.ndarray:
    c = fusion.shape[0]
    return np.ascontiguousarray(fusion.reshape(c, -1).T)


def _warn_degenerate(part: RegionPartition) -> None:
    warnings.warn(
        f"degenerate region partition (N_S={part.n_s}, N_C={part.n_c}, "
        f"N_B={part.n_b}); contributing 0 loss",
        RuntimeWarning,
        stacklevel=3,
    )


def _check_fusion(fusion, part: RegionPartition) -> np.ndarray:
    f = as_tensor3(fusion, "fusion")
    if f.shape[1:] != part.shape:
        raise DimensionError(f"fusion spatial dims {f.shape[1:]} != partition grid {part.shape}")
    return f


def sacloss_breakdown(fusion, part: RegionPartition, cfg: SacConfig, backend=None) -> dict:
    """Loss value plus per-term means and pair counts, as a plain dict."""
    f = _check_fusion(fusion, part)
    out = {
        "value": 0.0,
        "mean_dist_background": 0.0,
        "mean_dist_object": 0.0,
        "margin": cfg.margin,
        "pairs_background": part.n_s * part.n_b,
        "pairs_object": part.n_s * part.n_c,
        "degenerate": part.is_degenerate,
        "sign_convention": cfg.sign_convention.value,
    }
    if part.is_degenerate:
        _warn_degenerate(part)
        return out
    kern = _backend.get_backend(backend)
    feats = _pixel_features(f)
    mean_sb = kern.pair_sum(feats, part.surround, part.background) / out["pairs_background"]
    mean_sc = kern.pair_sum(feats, part.surround, part.obj) / out["pairs_object"]
    if cfg.sign_convention is SignConvention.PULL_OBJECT:
        value = -mean_sb + mean_sc + cfg.margin
    else:
        value = max(0.0, mean_sb - mean_sc + cfg.margin)
    out.update(value=value, mean_dist_background=mean_sb, mean_dist_object=mean_sc)
    return out


def sacloss_value(fusion, part: RegionPartition, cfg: SacConfig, backend=None) -> float:
    """Contrastive loss of one feature map under a region partition."""
    return sacloss_breakdown(fusion, part, cfg, backend)["value"]


def _value_and_grad(fusion, part: RegionPartition, cfg: SacConfig, backend=None):
    f = _check_fusion(fusion, part)
    grad = np.zeros_like(f)
    if part.is_degenerate:
        _warn_degenerate(part)
        return 0.0, grad
    kern = _backend.get_backend(backend)
    feats = _pixel_features(f)
    inv_sb = 1.0 / (part.n_s * part.n_b)
    inv_sc = 1.0 / (part.n_s * part.n_c)
    mean_sb = kern.pair_sum(feats, part.surround, part.background) * inv_sb
    mean_sc = kern.pair_sum(feats, part.surround, part.obj) * inv_sc
    if cfg.sign_convention is SignConvention.PULL_OBJECT:
        value = -mean_sb + mean_sc + cfg.margin
        coef_sb, coef_sc = -inv_sb, inv_sc
    else:
        raw = mean_sb - mean_sc + cfg.margin
        if raw <= 0.0:
            return 0.0, grad
        value = raw
        coef_sb, coef_sc = inv_sb, -inv_sc
    gfeat = np.zeros_like(feats)
    kern.pair_grad(feats, part.surround, part.background, coef_sb, gfeat)
    kern.pair_grad(feats, part.surround, part.obj, coef_sc, gfeat)
    return value, np.ascontiguousarray(gfeat.T).reshape(f.shape)


def sacloss_grad(fusion, part: RegionPartition, cfg: SacConfig, backend=None) -> np.ndarray:
    """Analytic gradient of :func:`sacloss_value` w.r.t. every feature element.

    Zero-distance pairs use the subgradient 0; a hinge clamped at its floor
    (pull-background convention) has gradient 0.
    """
    return _value_and_grad(fusion, part, cfg, backend)[1]


def _layer_transform(feature: np.ndarray, k: int, gt: np.ndarray, lm: np.ndarray, cfg: SacConfig):
    """Resize labels to the layer grid and apply the mode's sampling transform.

    Returns (map3d, partition, crop_hw, stride). Ground truth is reduced by
    max pooling (object presence dominates a block), the halo by average
    pooling. For the strided modes the layer map is cropped to the largest
    stride multiple first; the crop is at most stride-1 border rows/cols.
    """
    c, h, w = feature.shape
    if gt.shape[0] % h or gt.shape[1] % w:
        raise DimensionError(f"label dims {gt.shape} not divisible by layer dims ({h}, {w})")
    fh, fw = gt.shape[0] // h, gt.shape[1] // w
    if fh != fw:
        raise DimensionError(f"anisotropic label/layer ratio ({fh}, {fw}) unsupported")
    gt_k = downsample_max(gt, fh) if fh > 1 else gt
    lm_k = downsample_avg(lm, fh) if fh > 1 else lm

    if cfg.mode in (SamplingMode.FULL_PAIRWISE, SamplingMode.HIGH_LAYER):
        part = partition_regions(gt_k, lm_k, cfg.surround_threshold)
        return feature, part, (h, w), 1

    s = ScctLayout(k).stride
    hc, wc = (h // s) * s, (w // s) * s
    f_crop = feature[:, :hc, :wc]
    gt_c = np.ascontiguousarray(gt_k[:hc, :wc])
    lm_c = np.ascontiguousarray(lm_k[:hc, :wc])
    gt_s = downsample_max(gt_c, s) if s > 1 else gt_c
    lm_s = downsample_avg(lm_c, s) if s > 1 else lm_c
    part = partition_regions(gt_s, lm_s, cfg.surround_threshold)
    if cfg.mode is SamplingMode.SCCT:
        mapped = scct_forward(f_crop, ScctLayout(k))
    else:  # SUB_SAMPLE: keep only the first separated part
        mapped = np.ascontiguousarray(f_crop[:, ::s, ::s])
    return mapped, part, (hc, wc), s


def _included_layers(features, cfg: SacConfig):
    entries = [(as_tensor3(f, f"layer-{k} features"), int(k)) for f, k in features]
    for _, k in entries:
        if k not in (2, 3, 4):
            raise ParameterError(f"layer index must be in {{2, 3, 4}}, got {k}")
    if cfg.mode is SamplingMode.HIGH_LAYER:
        top = max(k for _, k in entries)
        return [(i, f, k) for i, (f, k) in enumerate(entries) if k == top]
    return [(i, f, k) for i, (f, k) in enumerate(entries)]


def sacloss_multi_layer(features, gt, lm, cfg: SacConfig, backend=None, detail: bool = False):
    """Sum of per-layer losses under the configured sampling strategy.

    `features` is an iterable of (tensor, layer_index) pairs with layer
    indices in {2, 3, 4}; `gt` and `lm` are full-resolution labels whose
    dims must be integer multiples of every layer's dims.

    With ``detail=True`` returns (total, per_layer) where per_layer holds
    one breakdown dict per included layer (adding the layer index and the
    pair counts actually evaluated).
    """
    mask = as_mask(gt, "gt")
    halo = _label_map(lm)
    total = 0.0
    rows = []
    for _, feat, k in _included_layers(features, cfg):
        mapped, part, _, stride = _layer_transform(feat, k, mask, halo, cfg)
        row = sacloss_breakdown(mapped, part, cfg, backend)
        row["k"] = k
        row["stride"] = stride
        total += row["value"]
        rows.append(row)
    if detail:
        return total, rows
    return total


def sacloss_multi_layer_grad(features, gt, lm, cfg: SacConfig, backend=None):
    """Multi-layer loss and its gradients w.r.t. each input feature tensor.

    Returns (total, grads) with grads aligned to the input list; layers
    excluded by the sampling mode get zero gradients. For the strided
    modes the gradient is routed back through the inverse transform and
    zero-padded over any cropped border.
    """
    mask = as_mask(gt, "gt")
    halo = _label_map(lm)
    entries = [(as_tensor3(f, f"layer-{k} features"), int(k)) for f, k in features]
    grads = [np.zeros_like(f) for f, _ in entries]
    total = 0.0
    for idx, feat, k in _included_layers(entries, cfg):
        mapped, part, (hc, wc), s = _layer_transform(feat, k, mask, halo, cfg)
        value, g_small = _value_and_grad(mapped, part, cfg, backend)
        total += value
        if cfg.mode is SamplingMode.SCCT and s > 1:
            grads[idx][:, :hc, :wc] = scct_inverse(g_small, ScctLayout(k))
        elif cfg.mode is SamplingMode.SUB_SAMPLE and s > 1:
            grads[idx][:, 0:hc:s, 0:wc:s] = g_small
        else:
            grads[idx][:, :, :] = g_small
    return total, grads
