"""Surrounding-area supervision labels.

The surrounding label of a binary ground-truth mask is a soft halo just
outside the object: blur the mask with a normalized Gaussian, then zero
out the object itself, keeping max(blur - mask, 0). The width of the halo
is controlled by the Gaussian's standard deviation in pixels.

At the reference input side of 352 px the standard deviation is 50; for
smaller working resolutions it scales proportionally with the image side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import as_mask, downsample_avg
from .errors import ParameterError

REFERENCE_SIDE = 352
REFERENCE_SIGMA = 50.0

__all__ = [
    "SurroundingLabel",
    "gaussian_kernel",
    "gaussian_blur",
    "surrounding_label",
    "surrounding_pyramid",
    "sigma_for_side",
]


def sigma_for_side(side: int) -> float:
    """Halo width scaled from the 352-px reference setting (sigma 50)."""
    return REFERENCE_SIGMA * side / REFERENCE_SIDE


def _gaussian_profile(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian, truncated at side = 2*ceil(3*sigma)+1."""
    if not (sigma > 0):
        raise ParameterError(f"sigma must be positive, got {sigma}")
    half = math.ceil(3.0 * sigma)
    ax = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(ax * ax) / (2.0 * sigma * sigma))
    return g / g.sum()


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Odd-sided 2-D Gaussian kernel, centro-symmetric, normalized to sum 1.

    Truncated at 3 standard deviations per axis (side = 2*ceil(3*sigma)+1)
    and renormalized, so > 99.7% of the untruncated mass is kept.
    """
    g = _gaussian_profile(sigma)
    return np.outer(g, g)


def gaussian_blur(map2d, sigma: float) -> np.ndarray:
    """Zero-padded Gaussian blur; separable form of conv with gaussian_kernel."""
    g = _gaussian_profile(sigma)
    x = np.asarray(map2d, dtype=np.float64)
    pad = g.size // 2
    for axis in (0, 1):
        xp = np.pad(x, [(pad, pad) if a == axis else (0, 0) for a in range(2)])
        x = sliding_window_view(xp, g.size, axis=axis) @ g
    return x


@dataclass(frozen=True)
class SurroundingLabel:
    """Soft halo map in [0, 1]; exactly 0 wherever the object mask is 1."""

    map: np.ndarray = field(repr=False)
    sigma: float = 0.0

    @property
    def shape(self):
        return self.map.shape


def surrounding_label(gt, sigma: float) -> SurroundingLabel:
    """Build the surrounding label max(blur(gt, sigma) - gt, 0).

    The halo peaks just outside the object boundary and decays with
    distance; it vanishes on the object itself and far away from it.
    """
    mask = as_mask(gt, "gt")
    blurred = gaussian_blur(mask, sigma)
    lm = np.maximum(blurred - mask, 0.0)
    # blur of a {0,1} mask stays within [0,1] up to rounding; clamp the tail
    np.clip(lm, 0.0, 1.0, out=lm)
    lm[mask == 1.0] = 0.0
    return SurroundingLabel(map=lm, sigma=float(sigma))


def surrounding_pyramid(label: SurroundingLabel, scales) -> list[np.ndarray]:
    """Average-pooled copies of the label map, one per scale, order kept."""
    return [downsample_avg(label.map, int(s)) for s in scales]
