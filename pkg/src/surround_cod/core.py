"""Minimal dense-array kernels shared by every other module.

Feature maps are plain numpy arrays in float64:

* ``Tensor3`` -- shape ``(C, H, W)``, channels first, row-major.
* ``SoftMap`` -- shape ``(H, W)``, real values (probability maps live in [0, 1]).
* ``Mask``   -- shape ``(H, W)``, strictly binary {0, 1}.

All operations here are pure functions on immutable inputs and are safe to
call concurrently.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import (
    DimensionError,
    EvaluationError,
    KernelError,
    ParameterError,
    ValidationError,
)

__all__ = [
    "as_tensor3",
    "as_softmap",
    "as_mask",
    "convolve2d_same",
    "sigmoid_map",
    "downsample_avg",
    "downsample_max",
    "upsample_bilinear",
    "upsample_bilinear_vjp",
    "concat_channels",
    "finite_diff_grad",
]


def as_tensor3(a, name: str = "tensor") -> np.ndarray:
    """Validate and return `a` as a float64 (C, H, W) array."""
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.ndim != 3:
        raise DimensionError(f"{name}: expected 3 axes (C, H, W), got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name}: contains non-finite values")
    return arr


def as_softmap(a, name: str = "map") -> np.ndarray:
    """Validate and return `a` as a float64 (H, W) array of finite values."""
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name}: expected 2 axes (H, W), got shape {arr.shape}")
    if arr.size == 0:
        raise DimensionError(f"{name}: empty map")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name}: contains non-finite values")
    return arr


def as_mask(a, name: str = "mask") -> np.ndarray:
    """Validate and return `a` as a strictly binary float64 (H, W) array."""
    arr = as_softmap(a, name)
    if not np.all((arr == 0.0) | (arr == 1.0)):
        raise ValidationError(f"{name}: values must be exactly 0 or 1")
    return arr


def _check_kernel(kernel: np.ndarray, h: int, w: int) -> np.ndarray:
    k = np.ascontiguousarray(kernel, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise KernelError(f"kernel must be square, got shape {k.shape}")
    side = k.shape[0]
    if side % 2 == 0:
        raise KernelError(f"kernel side must be odd, got {side}")
    if side > 2 * max(h, w) + 1:
        raise KernelError(f"kernel side {side} exceeds 2*max(H, W)+1 = {2 * max(h, w) + 1}")
    if not np.all(np.isfinite(k)):
        raise KernelError("kernel contains non-finite values")
    return k


def convolve2d_same(map2d, kernel) -> np.ndarray:
    """2-D convolution with zero padding; the output keeps the input shape.

    True convolution (the kernel is flipped); for the centro-symmetric
    kernels used throughout this package it coincides with correlation.
    """
    x = as_softmap(map2d)
    h, w = x.shape
    k = _check_kernel(kernel, h, w)
    pad = k.shape[0] // 2
    xp = np.pad(x, pad, mode="constant")
    windows = sliding_window_view(xp, k.shape)
    return np.einsum("hwij,ij->hw", windows, k[::-1, ::-1], optimize=True)


def sigmoid_map(map2d) -> np.ndarray:
    """Elementwise logistic 1 / (1 + exp(-x)); stable in both tails."""
    x = np.asarray(map2d, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _check_pool(shape, factor: int) -> None:
    if not isinstance(factor, (int, np.integer)) or factor < 1:
        raise ParameterError(f"pooling factor must be a positive integer, got {factor!r}")
    h, w = shape[-2], shape[-1]
    if h % factor or w % factor:
        raise DimensionError(f"dims ({h}, {w}) not divisible by factor {factor}")


def downsample_avg(map2d, factor: int) -> np.ndarray:
    """Average pooling by `factor`; each output pixel is its block mean.

    Accepts (H, W) maps and (C, H, W) tensors (pooled over the trailing axes).
    """
    x = np.asarray(map2d, dtype=np.float64)
    _check_pool(x.shape, factor)
    if factor == 1:
        return x.copy()
    h, w = x.shape[-2] // factor, x.shape[-1] // factor
    blocks = x.reshape(x.shape[:-2] + (h, factor, w, factor))
    return blocks.mean(axis=(-3, -1))


def downsample_max(map2d, factor: int) -> np.ndarray:
    """Max pooling by `factor`; same shapes as :func:`downsample_avg`."""
    x = np.asarray(map2d, dtype=np.float64)
    _check_pool(x.shape, factor)
    if factor == 1:
        return x.copy()
    h, w = x.shape[-2] // factor, x.shape[-1] // factor
    blocks = x.reshape(x.shape[:-2] + (h, factor, w, factor))
    return blocks.max(axis=(-3, -1))


def _interp_coords(n_in: int, factor: int):
    src = (np.arange(n_in * factor, dtype=np.float64) + 0.5) / factor - 0.5
    src = np.clip(src, 0.0, n_in - 1.0)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, src - i0


def _interp_axis(x, i0, i1, t, axis):
    x0 = np.take(x, i0, axis=axis)
    x1 = np.take(x, i1, axis=axis)
    shape = [1] * x.ndim
    shape[axis] = t.size
    tt = t.reshape(shape)
    return x0 * (1.0 - tt) + x1 * tt


def _interp_axis_vjp(g, i0, i1, t, axis, n_in):
    g = np.moveaxis(g, axis, 0)
    out = np.zeros((n_in,) + g.shape[1:], dtype=np.float64)
    tt = t.reshape((t.size,) + (1,) * (g.ndim - 1))
    np.add.at(out, i0, g * (1.0 - tt))
    np.add.at(out, i1, g * tt)
    return np.moveaxis(out, 0, axis)


def upsample_bilinear(x, factor: int) -> np.ndarray:
    """Bilinear upsampling by an integer factor (half-pixel centres, edge clamp).

    Accepts (H, W) maps and (C, H, W) tensors. Linear in the input, so its
    exact adjoint is :func:`upsample_bilinear_vjp`.
    """
    a = np.asarray(x, dtype=np.float64)
    if a.ndim not in (2, 3):
        raise DimensionError(f"expected 2 or 3 axes, got shape {a.shape}")
    if not isinstance(factor, (int, np.integer)) or factor < 1:
        raise ParameterError(f"upsampling factor must be a positive integer, got {factor!r}")
    if factor == 1:
        return a.copy()
    r0, r1, rt = _interp_coords(a.shape[-2], factor)
    c0, c1, ct = _interp_coords(a.shape[-1], factor)
    out = _interp_axis(a, r0, r1, rt, a.ndim - 2)
    return _interp_axis(out, c0, c1, ct, a.ndim - 1)


def upsample_bilinear_vjp(grad_out, in_shape, factor: int) -> np.ndarray:
    """Adjoint of :func:`upsample_bilinear` for an input of `in_shape`."""
    g = np.asarray(grad_out, dtype=np.float64)
    if factor == 1:
        return g.copy()
    h, w = in_shape[-2], in_shape[-1]
    r0, r1, rt = _interp_coords(h, factor)
    c0, c1, ct = _interp_coords(w, factor)
    g = _interp_axis_vjp(g, c0, c1, ct, g.ndim - 1, w)
    return _interp_axis_vjp(g, r0, r1, rt, g.ndim - 2, h)


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    pad = k // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(xp, (k, k), axis=(1, 2))
    c, h, w = x.shape
    return np.ascontiguousarray(win.transpose(0, 3, 4, 1, 2)).reshape(c * k * k, h * w)


def _col2im(gcols: np.ndarray, shape, k: int) -> np.ndarray:
    c, h, w = shape
    pad = k // 2
    g = gcols.reshape(c, k, k, h, w)
    gxp = np.zeros((c, h + 2 * pad, w + 2 * pad), dtype=np.float64)
    for i in range(k):
        for j in range(k):
            gxp[:, i : i + h, j : j + w] += g[:, i, j]
    return gxp[:, pad : pad + h, pad : pad + w]


def conv2d_mc(x, weights, bias=None) -> np.ndarray:
    """Multi-channel 2-D correlation with same zero padding (conv-layer semantics).

    `x` is (Cin, H, W), `weights` is (Cout, Cin, k, k) with odd k, `bias`
    is (Cout,) or None.
    """
    xt = np.asarray(x, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if xt.ndim != 3 or w.ndim != 4 or w.shape[2] != w.shape[3]:
        raise DimensionError(f"bad conv shapes: x {xt.shape}, weights {w.shape}")
    if w.shape[1] != xt.shape[0]:
        raise DimensionError(f"weights expect {w.shape[1]} input channels, got {xt.shape[0]}")
    if w.shape[2] % 2 == 0:
        raise KernelError(f"kernel side must be odd, got {w.shape[2]}")
    cols = _im2col(xt, w.shape[2])
    out = (w.reshape(w.shape[0], -1) @ cols).reshape(w.shape[0], xt.shape[1], xt.shape[2])
    if bias is not None:
        out += np.asarray(bias, dtype=np.float64)[:, None, None]
    return out


def conv2d_mc_vjp(grad_out, x, weights):
    """Gradients of :func:`conv2d_mc` w.r.t. input, weights, and bias."""
    xt = np.asarray(x, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    g = np.asarray(grad_out, dtype=np.float64)
    k = w.shape[2]
    cols = _im2col(xt, k)
    gmat = g.reshape(w.shape[0], -1)
    gw = (gmat @ cols.T).reshape(w.shape)
    gb = g.sum(axis=(1, 2))
    gcols = w.reshape(w.shape[0], -1).T @ gmat
    gx = _col2im(gcols, xt.shape, k)
    return gx, gw, gb


def concat_channels(a, b) -> np.ndarray:
    """Concatenate two (C, H, W) tensors along the channel axis; `a` first."""
    ta = np.asarray(a, dtype=np.float64)
    tb = np.asarray(b, dtype=np.float64)
    if ta.ndim != 3 or tb.ndim != 3:
        raise DimensionError("concat_channels expects (C, H, W) tensors")
    if ta.shape[1:] != tb.shape[1:]:
        raise DimensionError(f"spatial dims differ: {ta.shape[1:]} vs {tb.shape[1:]}")
    return np.concatenate([ta, tb], axis=0)


def finite_diff_grad(f: Callable[[np.ndarray], float], x, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function of an array.

    The verification oracle for every analytic backward pass in this
    package: (f(x + eps*e_i) - f(x - eps*e_i)) / (2*eps) per element.
    """
    if not (1e-7 <= eps <= 1e-3):
        raise ParameterError(f"eps must lie in [1e-7, 1e-3], got {eps}")
    x0 = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x0)
    flat_x = x0.reshape(-1)
    flat_g = grad.reshape(-1)
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + eps
        f_plus = float(f(x0))
        flat_x[i] = orig - eps
        f_minus = float(f(x0))
        flat_x[i] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise EvaluationError(f"objective returned a non-finite value at element {i}")
        flat_g[i] = (f_plus - f_minus) / (2.0 * eps)
    return grad
