"""Synthetic concealed-object samples for CPU-scale training.

Each sample is a 3-channel image whose background is a smooth random
texture and whose object is a randomly placed, rotated superellipse blob.
A difficulty knob in [0, 1] interpolates the object texture toward the
background texture: at 0 the object stands out clearly (mean intensity
gap around 0.5), at 1 it is texture-identical to the background and only
the label knows where it is.

Alongside the image the sample carries the binary mask, its one-pixel
inner boundary, and the surrounding halo label.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import upsample_bilinear
from .errors import ParameterError
from .surround import SurroundingLabel, sigma_for_side, surrounding_label

__all__ = ["SynthSample", "synth_sample", "inner_boundary"]


@dataclass(frozen=True)
class SynthSample:
    image: np.ndarray = field(repr=False)
    gt: np.ndarray = field(repr=False)
    edge: np.ndarray = field(repr=False)
    lm: SurroundingLabel = field(repr=False)
    seed: int = 0
    difficulty: float = 0.0


def inner_boundary(mask: np.ndarray) -> np.ndarray:
    """One-pixel inner boundary: mask minus its 4-neighbour erosion."""
    m = mask.astype(bool)
    core = m.copy()
    core[1:, :] &= m[:-1, :]
    core[:-1, :] &= m[1:, :]
    core[:, 1:] &= m[:, :-1]
    core[:, :-1] &= m[:, 1:]
    # image border pixels cannot have a full neighbourhood
    core[0, :] = core[-1, :] = False
    core[:, 0] = core[:, -1] = False
    return (m & ~core).astype(np.float64)


def _smooth_noise(rng: np.random.Generator, channels: int, side: int, amp: float) -> np.ndarray:
    coarse = rng.standard_normal((channels, side // 8, side // 8))
    return upsample_bilinear(coarse, 8) * amp


def _blob_mask(rng: np.random.Generator, side: int) -> np.ndarray:
    cy, cx = rng.uniform(0.38 * side, 0.62 * side, size=2)
    ry, rx = rng.uniform(side / 6.0, side / 4.0, size=2)
    theta = rng.uniform(0.0, np.pi)
    power = rng.uniform(1.6, 3.0)
    ys, xs = np.mgrid[0:side, 0:side]
    dy, dx = ys - cy, xs - cx
    u = dx * np.cos(theta) + dy * np.sin(theta)
    v = -dx * np.sin(theta) + dy * np.cos(theta)
    inside = (np.abs(u) / rx) ** power + (np.abs(v) / ry) ** power <= 1.0
    return inside.astype(np.float64)


def synth_sample(rng_seed: int, side: int, difficulty: float, sigma: float | None = None) -> SynthSample:
    """Deterministic synthetic sample; same seed gives a bit-identical sample."""
    if side % 8:
        raise ParameterError(f"side must be divisible by 8, got {side}")
    if not (0.0 <= difficulty <= 1.0):
        raise ParameterError(f"difficulty must lie in [0, 1], got {difficulty}")
    rng = np.random.default_rng(rng_seed)
    gt = _blob_mask(rng, side)

    bg_base = rng.uniform(0.15, 0.40, size=(3, 1, 1))
    bg = np.clip(bg_base + _smooth_noise(rng, 3, side, 0.08), 0.0, 1.0)
    obj_base = bg_base + rng.uniform(0.45, 0.55)
    obj = np.clip(obj_base + _smooth_noise(rng, 3, side, 0.08), 0.0, 1.0)
    obj = (1.0 - difficulty) * obj + difficulty * bg

    image = bg.copy()
    on = gt == 1.0
    image[:, on] = obj[:, on]

    halo_sigma = sigma_for_side(side) if sigma is None else float(sigma)
    lm = surrounding_label(gt, halo_sigma)
    return SynthSample(
        image=image,
        gt=gt,
        edge=inner_boundary(gt),
        lm=lm,
        seed=int(rng_seed),
        difficulty=float(difficulty),
    )
