"""Spatial compression of feature maps by stride-interleaved separation.

A map of shape (C, H, W) is split into s*s interleaved parts, where the
stride s depends on the layer index k in {2, 3, 4} as s = 5 - k: part
(i, j) collects the pixels at rows i, i+s, i+2s, ... and columns
j, j+s, j+2s, ... All parts are stacked along the channel axis in
row-major (i, j) order, giving shape (C*s*s, H/s, W/s).

The transform is a bijective permutation of the elements (identical to a
pixel-unshuffle with the part axis leading), so spatially adjacent pixels
of equal residue stay adjacent in their part, and the exact inverse
restores the original map bit-for-bit. Candidate pixel-pair counts on the
compact grid shrink by s**4 relative to the full grid.

Note: stacking all s*s parts gives C*s*s output channels, which is the
only channel count that conserves the element total for s > 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, LayoutError, ParameterError

__all__ = ["ScctLayout", "scct_forward", "scct_inverse", "pair_count_reduction"]


@dataclass(frozen=True)
class ScctLayout:
    """Layer-indexed separation layout: stride s = 5 - k, s*s parts."""

    k: int

    def __post_init__(self):
        if self.k not in (2, 3, 4):
            raise ParameterError(f"layer index k must be in {{2, 3, 4}}, got {self.k}")

    @property
    def stride(self) -> int:
        return 5 - self.k

    @property
    def part_count(self) -> int:
        return self.stride * self.stride


def scct_forward(f, layout: ScctLayout) -> np.ndarray:
    """Separate (C, H, W) into interleaved parts stacked along channels.

    Output shape is (C*s*s, H/s, W/s); part (i, j) occupies the contiguous
    channel block [(i*s + j)*C, (i*s + j + 1)*C). For k = 4 (s = 1) this is
    the identity.
    """
    x = np.asarray(f, dtype=np.float64)
    if x.ndim != 3:
        raise DimensionError(f"expected (C, H, W), got shape {x.shape}")
    s = layout.stride
    c, h, w = x.shape
    if h % s or w % s:
        raise DimensionError(f"spatial dims ({h}, {w}) not divisible by stride {s}")
    if s == 1:
        return x.copy()
    parts = x.reshape(c, h // s, s, w // s, s)
    return np.ascontiguousarray(parts.transpose(2, 4, 0, 1, 3)).reshape(c * s * s, h // s, w // s)


def scct_inverse(f, layout: ScctLayout) -> np.ndarray:
    """Exact inverse of :func:`scct_forward`; a two-sided bijection."""
    y = np.asarray(f, dtype=np.float64)
    if y.ndim != 3:
        raise DimensionError(f"expected (C, H, W), got shape {y.shape}")
    s = layout.stride
    cs, h, w = y.shape
    if cs % (s * s):
        raise LayoutError(f"channel count {cs} not divisible by part count {s * s}")
    if s == 1:
        return y.copy()
    c = cs // (s * s)
    parts = y.reshape(s, s, c, h, w)
    return np.ascontiguousarray(parts.transpose(2, 3, 0, 4, 1)).reshape(c, h * s, w * s)


def pair_count_reduction(layout: ScctLayout, h: int, w: int) -> float:
    """Factor by which the candidate pixel-pair space shrinks: s**4."""
    s = layout.stride
    if h % s or w % s:
        raise DimensionError(f"dims ({h}, {w}) not divisible by stride {s}")
    full = float(h * w) ** 2
    compact = float((h // s) * (w // s)) ** 2
    return full / compact
