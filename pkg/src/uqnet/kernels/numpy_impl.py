"""BLAS-backed correlation kernels.

Patches are gathered with big strided slice copies (one per kernel tap,
never per pixel) and the contraction itself runs as a single matrix
product, so nearly all time is spent inside BLAS.
"""

from __future__ import annotations

import numpy as np


def corr_fwd(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Valid cross-correlation plus bias.

    x: (n, h, wd, c), w: (p, q, c, k), b: (k,) -> (n, h-p+1, wd-q+1, k).
    """
    n, h, wd, c = x.shape
    p, q, _, k = w.shape
    ho = h - p + 1
    wo = wd - q + 1
    cols = np.empty((n, ho, wo, p, q, c), dtype=x.dtype)
    for u in range(p):
        for v in range(q):
            cols[:, :, :, u, v, :] = x[:, u : u + ho, v : v + wo, :]
    out = cols.reshape(n * ho * wo, p * q * c) @ w.reshape(p * q * c, k)
    out += b
    return out.reshape(n, ho, wo, k)


def corr_wgrad(x: np.ndarray, dout: np.ndarray) -> np.ndarray:
    """Gradient of corr_fwd w.r.t. the kernel stack.

    x: (n, h, wd, c), dout: (n, ho, wo, k) -> (p, q, c, k).
    """
    n, h, wd, c = x.shape
    _, ho, wo, k = dout.shape
    p = h - ho + 1
    q = wd - wo + 1
    dm = np.ascontiguousarray(dout).reshape(n * ho * wo, k)
    dw = np.empty((p, q, c, k), dtype=x.dtype)
    for u in range(p):
        for v in range(q):
            patch = np.ascontiguousarray(x[:, u : u + ho, v : v + wo, :])
            dw[u, v] = patch.reshape(n * ho * wo, c).T @ dm
    return dw


def corr_dgrad(dout: np.ndarray, w: np.ndarray, h: int, wd: int) -> np.ndarray:
    """Gradient of corr_fwd w.r.t. the input of spatial size (h, wd).

    dout: (n, ho, wo, k), w: (p, q, c, k) -> (n, h, wd, c).
    """
    p, q, c, k = w.shape
    n, ho, wo, _ = dout.shape
    dm = np.ascontiguousarray(dout).reshape(n * ho * wo, k)
    dcols = dm @ w.reshape(p * q * c, k).T
    dcols = dcols.reshape(n, ho, wo, p, q, c)
    dx = np.zeros((n, h, wd, c), dtype=dout.dtype)
    for u in range(p):
        for v in range(q):
            dx[:, u : u + ho, v : v + wo, :] += dcols[:, :, :, u, v, :]
    return dx
