"""Convolution kernel backends.

Two interchangeable implementations of the valid cross-correlation
primitives used by the network layers:

- ``"numpy"``: im2col patch gathering plus BLAS matrix products.
  Fastest when only one core is usable, because BLAS SIMD kernels beat
  scalar loops on a single thread.
- ``"numba"``: compiled direct loops parallelised with ``prange``.
  Scales across cores; every parallel iteration writes a disjoint
  slice, so results do not depend on thread scheduling.

The active backend is chosen lazily, on first kernel call, from the
``UQNET_BACKEND`` environment variable (``"numpy"``, ``"numba"`` or
``"auto"``, default ``"auto"``).  ``"auto"`` picks numba when it is
importable and more than one core is usable, otherwise numpy.
:func:`use_backend` overrides the choice at runtime; the test-suite
uses it to check that both paths agree.

Both backends expose the same three functions with identical
semantics (all arrays are batch-height-width-channel):

- ``corr_fwd(x, w, b)``: valid cross-correlation plus bias.
- ``corr_wgrad(x, dout)``: gradient of ``corr_fwd`` w.r.t. ``w``.
- ``corr_dgrad(dout, w, h, wd)``: gradient w.r.t. ``x`` of spatial
  size ``(h, wd)``.

Kernel orientation (flipping) and padding are handled by the calling
layer, not here.
"""

from __future__ import annotations

import importlib.util
import os

import numpy as np

_active = None
_active_name = ""


def _usable_cores() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def _resolve(name: str) -> None:
    global _active, _active_name
    if name == "auto":
        has_numba = importlib.util.find_spec("numba") is not None
        name = "numba" if has_numba and _usable_cores() > 1 else "numpy"
    if name == "numpy":
        from . import numpy_impl as impl
    elif name == "numba":
        try:
            from . import numba_impl as impl
        except ImportError as exc:
            raise ImportError(
                "UQNET_BACKEND=numba requested but numba is not importable"
            ) from exc
    else:
        raise ValueError(
            f"unknown backend {name!r}; expected 'numpy', 'numba' or 'auto'"
        )
    _active = impl
    _active_name = name


def use_backend(name: str) -> None:
    """Force a backend by name ('numpy', 'numba' or 'auto')."""
    _resolve(name)


def active_name() -> str:
    """Name of the backend in use, resolving it on first call."""
    if _active is None:
        _resolve(os.environ.get("UQNET_BACKEND", "auto"))
    return _active_name


def corr_fwd(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    if _active is None:
        active_name()
    return _active.corr_fwd(x, w, b)


def corr_wgrad(x: np.ndarray, dout: np.ndarray) -> np.ndarray:
    if _active is None:
        active_name()
    return _active.corr_wgrad(x, dout)


def corr_dgrad(dout: np.ndarray, w: np.ndarray, h: int, wd: int) -> np.ndarray:
    if _active is None:
        active_name()
    return _active.corr_dgrad(dout, w, h, wd)
