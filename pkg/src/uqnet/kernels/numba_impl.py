"""Compiled direct-loop correlation kernels.

Each function parallelises over an axis whose iterations write disjoint
output slices (batch rows for corr_fwd/corr_dgrad, kernel taps for
corr_wgrad), so the results are independent of thread count and
scheduling order.  Inner loops run over the channel-out axis, which is
contiguous in memory and vectorises.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange


@njit(cache=True, fastmath=True, parallel=True)
def corr_fwd(x, w, b):
    n, h, wd, c = x.shape
    p, q, _, k = w.shape
    ho = h - p + 1
    wo = wd - q + 1
    out = np.empty((n, ho, wo, k), dtype=x.dtype)
    for i in prange(n):
        acc = np.empty_like(b)
        for y in range(ho):
            for z in range(wo):
                for kk in range(k):
                    acc[kk] = b[kk]
                for u in range(p):
                    for v in range(q):
                        for ch in range(c):
                            xv = x[i, y + u, z + v, ch]
                            for kk in range(k):
                                acc[kk] += xv * w[u, v, ch, kk]
                for kk in range(k):
                    out[i, y, z, kk] = acc[kk]
    return out


@njit(cache=True, fastmath=True, parallel=True)
def corr_wgrad(x, dout):
    n, h, wd, c = x.shape
    _, ho, wo, k = dout.shape
    p = h - ho + 1
    q = wd - wo + 1
    dw = np.zeros((p, q, c, k), dtype=x.dtype)
    for uv in prange(p * q):
        u = uv // q
        v = uv % q
        for i in range(n):
            for y in range(ho):
                for z in range(wo):
                    for ch in range(c):
                        xv = x[i, y + u, z + v, ch]
                        for kk in range(k):
                            dw[u, v, ch, kk] += xv * dout[i, y, z, kk]
    return dw


@njit(cache=True, fastmath=True, parallel=True)
def corr_dgrad(dout, w, h, wd):
    p, q, c, k = w.shape
    n, ho, wo, _ = dout.shape
    dx = np.zeros((n, h, wd, c), dtype=dout.dtype)
    for i in prange(n):
        for y in range(ho):
            for z in range(wo):
                for u in range(p):
                    for v in range(q):
                        for ch in range(c):
                            s = dout[i, y, z, 0] * w[u, v, ch, 0]
                            for kk in range(1, k):
                                s += dout[i, y, z, kk] * w[u, v, ch, kk]
                            dx[i, y + u, z + v, ch] += s
    return dx
