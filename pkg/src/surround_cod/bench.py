"""Benchmark harness for the contrastive-loss sampling strategies.

Runs every sampling mode on identical random inputs and reports the
median wall time, the number of pairwise distance evaluations actually
performed, and the loss value. Labels are generated block-aligned to the
layer stride so the compressed modes hit exactly the s**4 pair-count
reduction. Optionally repeats the measurement per kernel backend.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import backend as _backend
from .errors import ParameterError
from .sacloss import SacConfig, SamplingMode, sacloss_multi_layer
from .scct import ScctLayout

__all__ = ["BenchResult", "bench_sacloss"]


@dataclass(frozen=True)
class BenchResult:
    mode: SamplingMode
    backend: str
    wall_time: float
    distance_evals: int
    loss_value: float


def _block_labels(rng: np.random.Generator, h: int, w: int, stride: int):
    """Random gt/halo labels constant on stride-aligned blocks."""
    hc, wc = h // stride, w // stride
    gt_small = (rng.random((hc, wc)) < 0.25).astype(np.float64)
    lm_small = np.where(gt_small == 1.0, 0.0, rng.random((hc, wc)))
    if stride == 1:
        return gt_small, lm_small
    gt = np.repeat(np.repeat(gt_small, stride, axis=0), stride, axis=1)
    lm = np.repeat(np.repeat(lm_small, stride, axis=0), stride, axis=1)
    return gt, lm


def bench_sacloss(h: int, w: int, c: int, k: int, repeats: int, seed: int = 0,
                  backends=None) -> list[BenchResult]:
    """Measure all four sampling modes on one random feature map.

    Dims must be divisible by the layer's stride. `repeats` timed runs per
    mode; the reported wall time is the median. With ``repeats=0`` the
    result list is empty.
    """
    if repeats < 0:
        raise ParameterError(f"repeats must be >= 0, got {repeats}")
    if repeats == 0:
        return []
    stride = ScctLayout(k).stride
    if h % stride or w % stride:
        raise ParameterError(f"dims ({h}, {w}) not divisible by stride {stride} for k={k}")

    rng = np.random.default_rng(seed)
    features = rng.standard_normal((c, h, w))
    gt, lm = _block_labels(rng, h, w, stride)

    names = list(backends) if backends else [_backend.default_backend_name()]
    results = []
    for name in names:
        for mode in SamplingMode:
            cfg = SacConfig(mode=mode)
            times = []
            value = 0.0
            evals = 0
            for _ in range(repeats):
                start = time.perf_counter()
                value, rows = sacloss_multi_layer(
                    [(features, k)], gt, lm, cfg, backend=name, detail=True
                )
                times.append(time.perf_counter() - start)
                evals = sum(r["pairs_background"] + r["pairs_object"] for r in rows)
            results.append(
                BenchResult(
                    mode=mode,
                    backend=name,
                    wall_time=float(np.median(times)),
                    distance_evals=int(evals),
                    loss_value=float(value),
                )
            )
    return results
