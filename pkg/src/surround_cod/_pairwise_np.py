"""Pure-numpy fallback for the pairwise distance kernels.

Differences are formed explicitly (no norm-expansion trick) so the
arithmetic matches the compiled backend and stays accurate for nearly
identical feature vectors. Anchors are processed in fixed-size chunks to
bound memory; index arrays must contain unique row indices.
"""

from __future__ import annotations

import numpy as np

_CHUNK = 128


def pair_sum(feats: np.ndarray, idx_a: np.ndarray, idx_b: np.ndarray) -> float:
    """Sum of ||feats[a] - feats[b]|| over the full (a, b) index product."""
    fa = feats[idx_a]
    fb = feats[idx_b]
    total = 0.0
    for start in range(0, fa.shape[0], _CHUNK):
        block = fa[start : start + _CHUNK, None, :] - fb[None, :, :]
        total += float(np.sqrt(np.einsum("abc,abc->ab", block, block)).sum())
    return total


def pair_grad(feats, idx_a, idx_b, coef: float, grad) -> None:
    """Accumulate coef * d/dfeats of pair_sum into `grad` (same shape as feats)."""
    fa = feats[idx_a]
    fb = feats[idx_b]
    grad_b = np.zeros((idx_b.size, feats.shape[1]), dtype=np.float64)
    for start in range(0, fa.shape[0], _CHUNK):
        sl = slice(start, start + _CHUNK)
        block = fa[sl, None, :] - fb[None, :, :]
        dist = np.sqrt(np.einsum("abc,abc->ab", block, block))
        np.divide(block, dist[:, :, None], out=block, where=dist[:, :, None] > 0.0)
        block[dist == 0.0] = 0.0
        grad[idx_a[sl]] += coef * block.sum(axis=1)
        grad_b -= coef * block.sum(axis=0)
    grad[idx_b] += grad_b
