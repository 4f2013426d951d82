"""File formats: the SCT1 binary tensor container and 8-bit image maps.

SCT1 layout: magic bytes ``SCT1``, three little-endian uint32 dims
``(C, H, W)``, then ``C*H*W`` little-endian IEEE-754 float32 values in
row-major (c, h, w) order. 2-D maps and masks are stored with C = 1.

Grayscale images (PGM or PNG) carry values linearly mapped between
[0, 255] bytes and [0.0, 1.0] reals. 3-channel PNG is accepted for input
images only.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ValidationError

MAGIC = b"SCT1"

__all__ = [
    "read_tensor",
    "write_tensor",
    "read_gray",
    "read_mask",
    "write_gray",
    "read_image",
    "write_image",
]


def write_tensor(path, arr) -> None:
    """Write a (C, H, W) or (H, W) array as an SCT1 file (float32)."""
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim == 2:
        a = a[None, :, :]
    if a.ndim != 3:
        raise ValidationError(f"SCT1 stores 2-D or 3-D arrays, got shape {a.shape}")
    c, h, w = a.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", c, h, w))
        fh.write(a.astype("<f4").tobytes(order="C"))


def read_tensor(path) -> np.ndarray:
    """Read an SCT1 file into a float64 (C, H, W) array."""
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != MAGIC:
        raise ValidationError(f"{path}: not an SCT1 file")
    c, h, w = struct.unpack("<III", raw[4:16])
    expected = 16 + 4 * c * h * w
    if len(raw) != expected:
        raise ValidationError(f"{path}: payload size {len(raw)} != expected {expected}")
    data = np.frombuffer(raw, dtype="<f4", offset=16)
    return data.reshape(c, h, w).astype(np.float64)


def read_gray(path) -> np.ndarray:
    """Read an 8-bit grayscale PGM/PNG into an (H, W) float64 map in [0, 1]."""
    with Image.open(path) as img:
        if img.mode not in ("L", "I;16", "1"):
            raise ValidationError(f"{path}: expected 8-bit grayscale, got mode {img.mode}")
        arr = np.asarray(img.convert("L"), dtype=np.float64)
    return arr / 255.0


def read_mask(path) -> np.ndarray:
    """Read a grayscale image as a binary mask; bytes must be 0 or 255."""
    m = read_gray(path)
    if not np.all((m == 0.0) | (m == 1.0)):
        raise ValidationError(f"{path}: mask bytes must be exactly 0 or 255")
    return m


def write_gray(path, map2d) -> None:
    """Write an (H, W) map in [0, 1] as an 8-bit grayscale image."""
    a = np.asarray(map2d, dtype=np.float64)
    if a.ndim != 2:
        raise ValidationError(f"expected (H, W) map, got shape {a.shape}")
    data = np.clip(np.rint(a * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(data, mode="L").save(path)


def read_image(path) -> np.ndarray:
    """Read a grayscale or RGB image into a (C, H, W) float64 tensor in [0, 1]."""
    with Image.open(path) as img:
        if img.mode == "L":
            arr = np.asarray(img, dtype=np.float64)[None, :, :]
        elif img.mode in ("RGB", "RGBA"):
            arr = np.asarray(img.convert("RGB"), dtype=np.float64).transpose(2, 0, 1)
        else:
            raise ValidationError(f"{path}: unsupported image mode {img.mode}")
    return arr / 255.0


def write_image(path, tensor) -> None:
    """Write a (1, H, W) or (3, H, W) tensor in [0, 1] as PGM/PNG."""
    a = np.asarray(tensor, dtype=np.float64)
    if a.ndim != 3 or a.shape[0] not in (1, 3):
        raise ValidationError(f"expected (1|3, H, W) tensor, got shape {a.shape}")
    data = np.clip(np.rint(a * 255.0), 0, 255).astype(np.uint8)
    if a.shape[0] == 1:
        Image.fromarray(data[0], mode="L").save(path)
    else:
        Image.fromarray(data.transpose(1, 2, 0), mode="RGB").save(path)
