"""Selection of the pairwise-kernel backend.

The compiled extension (`surround_cod._native`) is preferred when it was
built; otherwise the numpy implementation is used. The environment
variable SURROUND_COD_BACKEND forces a choice: "native", "numpy", or
"auto" (default).
"""

from __future__ import annotations

import os

from . import _pairwise_np
from .errors import ConfigError

_BACKENDS = {"numpy": _pairwise_np}

try:
    from . import _native  # compiled at install time

    _BACKENDS["native"] = _native
except ImportError:  # source checkout without the built extension
    _native = None

__all__ = ["available_backends", "default_backend_name", "get_backend"]


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def default_backend_name() -> str:
    forced = os.environ.get("SURROUND_COD_BACKEND", "auto").lower()
    if forced == "auto":
        return "native" if "native" in _BACKENDS else "numpy"
    if forced not in _BACKENDS:
        raise ConfigError(
            f"SURROUND_COD_BACKEND={forced!r} not available; choices: auto, "
            + ", ".join(available_backends())
        )
    return forced


def get_backend(name: str | None = None):
    """Return the kernel module for `name` (default: active backend)."""
    if name is None:
        name = default_backend_name()
    if name not in _BACKENDS:
        raise ConfigError(f"unknown backend {name!r}; choices: {available_backends()}")
    return _BACKENDS[name]
