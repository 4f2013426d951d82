"""Layer-by-layer refinement of a coarse prediction map.

Fusion features are built by concatenating texture and edge features and
mixing them with a learned 3x3 convolution. A surrounding constraint map
(the sigmoid of the surrounding logit map) gates the fusion features
elementwise, producing surrounding guidance; object guidance comes from
the texture path. Each refinement step adds object guidance to the coarse
logit map, subtracts surrounding guidance, and upsamples to the next
layer's resolution; folding the steps over layers 4, 3, 2 yields the
final prediction map.

Guidance tensors are reduced to one channel by channel-mean before the
update, and the maps are treated as logits throughout (a sigmoid is only
applied when a probability map is needed downstream).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    as_softmap,
    as_tensor3,
    concat_channels,
    conv2d_mc,
    sigmoid_map,
    upsample_bilinear,
)
from .errors import DimensionError

__all__ = [
    "GuidanceBundle",
    "constraint_map",
    "fuse_features",
    "group_guidance",
    "refine_step",
    "refine_chain",
]


def constraint_map(o_sur) -> np.ndarray:
    """Sigmoid of the surrounding logit map; values in (0, 1)."""
    return sigmoid_map(as_softmap(o_sur, "o_sur"))


def fuse_features(f_t, f_e, weights, bias=None) -> np.ndarray:
    """Concatenate texture and edge features, then mix with a 3x3 convolution.

    `weights` has shape (C_out, C_t + C_e, 3, 3); the output keeps the
    spatial dims of the inputs.
    """
    t = as_tensor3(f_t, "f_t")
    e = as_tensor3(f_e, "f_e")
    stacked = concat_channels(t, e)
    return conv2d_mc(stacked, weights, bias)


def group_guidance(c_sur, f_fusion) -> np.ndarray:
    """Gate every fusion channel elementwise by the constraint map."""
    c = as_softmap(c_sur, "c_sur")
    f = as_tensor3(f_fusion, "f_fusion")
    if f.shape[1:] != c.shape:
        raise DimensionError(f"fusion dims {f.shape[1:]} != constraint dims {c.shape}")
    return f * c[None, :, :]


def refine_step(o_c_k, g_obj_k, g_sur_k) -> np.ndarray:
    """One refinement update: add object guidance, subtract surrounding guidance.

    Guidance tensors are channel-mean reduced to the coarse map's grid; the
    updated map is bilinearly upsampled x2 to the next layer's resolution.
    """
    o = as_softmap(o_c_k, "o_c")
    g_obj = as_tensor3(g_obj_k, "g_obj")
    g_sur = as_tensor3(g_sur_k, "g_sur")
    if g_obj.shape[1:] != o.shape or g_sur.shape[1:] != o.shape:
        raise DimensionError(
            f"guidance dims {g_obj.shape[1:]}/{g_sur.shape[1:]} != coarse map dims {o.shape}"
        )
    updated = o + g_obj.mean(axis=0) - g_sur.mean(axis=0)
    return upsample_bilinear(updated, 2)


@dataclass(frozen=True)
class GuidanceBundle:
    """Per-layer guidance tensors ordered k = 4, 3, 2 (possibly empty)."""

    g_obj: tuple = field(default=())
    g_sur: tuple = field(default=())

    def __post_init__(self):
        if len(self.g_obj) != len(self.g_sur):
            raise DimensionError(
                f"guidance lists differ in length: {len(self.g_obj)} vs {len(self.g_sur)}"
            )
        for go, gs in zip(self.g_obj, self.g_sur):
            if np.shape(go)[1:] != np.shape(gs)[1:]:
                raise DimensionError("per-layer guidance tensors must share spatial dims")

    def __len__(self):
        return len(self.g_obj)


def refine_chain(o_c4, bundle: GuidanceBundle) -> np.ndarray:
    """Fold :func:`refine_step` over the bundle; returns the final map.

    An empty bundle returns the coarse map unchanged; each step doubles
    the resolution, so a 3-layer bundle yields 8x the input resolution.
    """
    o = as_softmap(o_c4, "o_c4").copy()
    for g_obj, g_sur in zip(bundle.g_obj, bundle.g_sur):
        o = refine_step(o, g_obj, g_sur)
    return o
