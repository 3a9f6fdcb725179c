"""Differentiable layer operations.

Every ``*_node`` function consumes and produces autodiff Nodes with a
hand-written vector-Jacobian callback.  Layout is channel-last
(batch, height, width, channel) for feature maps and (batch, feature)
for dense activations.  Convolutions follow the flipped-kernel (true
convolution) orientation: the stored kernel is reversed along height,
width and input-channel axes before the correlation kernels run.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .. import kernels
from .autodiff import Node


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax along the last axis."""
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def check_finite(value: np.ndarray, layer_name: str) -> None:
    """Raise when a layer output contains NaN or Inf.

    A NaN poisons the sum and an Inf saturates it, so one reduction
    detects both without allocating an elementwise mask.
    """
    if not np.isfinite(np.sum(value)):
        raise RuntimeError(f"non-finite values in layer '{layer_name}'")


def conv2d_node(x: Node, w: Node, b: Node, padding: str) -> Node:
    """Flipped-kernel convolution plus bias.

    ``x``: (n, h, wd, c); ``w``: (p, q, c, k); ``b``: (k,).  Output
    channel k at (y, z) is ``b_k + sum_{u,v,ch} w[p-1-u, q-1-v,
    c-1-ch, k] * x[y+u, z+v, ch]`` over the valid extent; "same"
    padding zero-pads the input symmetrically first, which requires
    odd kernel sides.
    """
    n, h, wd, c = x.value.shape
    p, q, cin, k = w.value.shape
    if cin != c:
        raise ValueError(
            f"kernel expects {cin} input channels, input has {c} "
            f"(input {x.value.shape}, kernel {w.value.shape})"
        )
    if padding == "same":
        if p % 2 == 0 or q % 2 == 0:
            raise ValueError(
                f"same-padding requires odd kernel sides, got {p}x{q}"
            )
        ph, pw = (p - 1) // 2, (q - 1) // 2
    elif padding == "valid":
        ph = pw = 0
        if h < p or wd < q:
            raise ValueError(
                f"kernel {p}x{q} does not fit {h}x{wd} input under valid padding"
            )
    else:
        raise ValueError(f"unknown padding {padding!r}")

    wf = np.ascontiguousarray(w.value[::-1, ::-1, ::-1, :])
    if ph or pw:
        xp = np.pad(x.value, ((0, 0), (ph, ph), (pw, pw), (0, 0)))
    else:
        xp = x.value
    out = kernels.corr_fwd(xp, wf, b.value)
    hp, wp = xp.shape[1], xp.shape[2]

    def vjp(g):
        g = np.ascontiguousarray(g)
        db = g.sum(axis=(0, 1, 2))
        dwf = kernels.corr_wgrad(xp, g)
        dw = np.ascontiguousarray(dwf[::-1, ::-1, ::-1, :])
        dxp = kernels.corr_dgrad(g, wf, hp, wp)
        if ph or pw:
            dx = np.ascontiguousarray(dxp[:, ph : ph + h, pw : pw + wd, :])
        else:
            dx = dxp
        return dx, dw, db

    return Node(out, (x, w, b), vjp)


def relu_node(x: Node) -> Node:
    out = np.maximum(x.value, 0)

    def vjp(g):
        return (g * (x.value > 0),)

    return Node(out, (x,), vjp)


def add_node(a: Node, b: Node) -> Node:
    def vjp(g):
        return g, g

    return Node(a.value + b.value, (a, b), vjp)


def dropout_node(x: Node, mask: np.ndarray) -> Node:
    """Multiply by a precomputed (already 1/(1-rate)-scaled) mask."""

    def vjp(g):
        dx = g * mask
        if dx.shape != x.value.shape:
            raise ValueError("dropout mask must broadcast to the input shape")
        return (dx,)

    return Node(x.value * mask, (x,), vjp)


def avgpool2_node(x: Node) -> Node:
    """Non-overlapping 2x2 mean pooling; spatial sides must be even."""
    n, h, wd, c = x.value.shape
    if h % 2 or wd % 2:
        raise ValueError(f"2x2 pooling needs even spatial sides, got {h}x{wd}")
    out = x.value.reshape(n, h // 2, 2, wd // 2, 2, c).mean(axis=(2, 4))

    def vjp(g):
        dx = (g * np.asarray(0.25, dtype=g.dtype)).repeat(2, axis=1).repeat(2, axis=2)
        return (dx,)

    return Node(out, (x,), vjp)


def gap_node(x: Node) -> Node:
    """Global average pooling to (batch, channel)."""
    n, h, wd, c = x.value.shape
    out = x.value.mean(axis=(1, 2))
    inv = 1.0 / (h * wd)

    def vjp(g):
        dx = np.empty_like(x.value)
        dx[:] = g[:, None, None, :] * np.asarray(inv, dtype=g.dtype)
        return (dx,)

    return Node(out, (x,), vjp)


def dense_node(x: Node, w: Node, b: Node) -> Node:
    if x.value.shape[1] != w.value.shape[0]:
        raise ValueError(
            f"dense expects {w.value.shape[0]} features, input has "
            f"{x.value.shape[1]}"
        )
    out = x.value @ w.value + b.value

    def vjp(g):
        return g @ w.value.T, x.value.T @ g, g.sum(axis=0)

    return Node(out, (x, w, b), vjp)


def batchnorm_node(
    x: Node,
    gamma: Node,
    beta: Node,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    *,
    train: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
):
    """Per-channel batch normalization over (batch, height, width).

    Training mode normalizes with the batch's population statistics
    and returns updated running statistics; inference mode uses the
    running statistics as constants.  Returns (node, new_running_mean,
    new_running_var).
    """
    if train:
        mu = x.value.mean(axis=(0, 1, 2))
        var = x.value.var(axis=(0, 1, 2))
        new_mean = (1.0 - momentum) * running_mean + momentum * mu
        new_var = (1.0 - momentum) * running_var + momentum * var
    else:
        mu, var = running_mean, running_var
        new_mean, new_var = running_mean, running_var
    s = np.sqrt(var + eps).astype(x.value.dtype)
    xhat = (x.value - mu.astype(x.value.dtype)) / s
    out = gamma.value * xhat + beta.value

    def vjp(g):
        dgamma = (g * xhat).sum(axis=(0, 1, 2))
        dbeta = g.sum(axis=(0, 1, 2))
        gh = g * gamma.value
        if train:
            mean_gh = gh.mean(axis=(0, 1, 2))
            mean_ghx = (gh * xhat).mean(axis=(0, 1, 2))
            dx = (gh - mean_gh - xhat * mean_ghx) / s
        else:
            dx = gh / s
        return dx, dgamma, dbeta

    return Node(out, (x, gamma, beta), vjp), new_mean, new_var


def _onehot(labels: np.ndarray, n_classes: int, dtype) -> np.ndarray:
    return np.eye(n_classes, dtype=dtype)[labels]


def _ce_terms(z: np.ndarray, labels: np.ndarray):
    """Per-row cross-entropy and softmax for logits z of shape (..., n, c)."""
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    denom = e.sum(axis=-1, keepdims=True)
    probs = e / denom
    idx = np.broadcast_to(labels, z.shape[:-1])[..., None]
    picked = np.take_along_axis(shifted, idx, axis=-1)[..., 0]
    ce = np.log(denom[..., 0]) - picked
    return ce, probs


def ce_loss_value(
    logits: np.ndarray, labels: np.ndarray, sample_weights: Optional[np.ndarray] = None
) -> float:
    """Weighted mean cross-entropy of softmax(logits) against labels."""
    ce, _ = _ce_terms(logits, labels)
    if sample_weights is not None:
        ce = ce * sample_weights
    return float(ce.mean())


def ce_loss_node(
    logits: Node, labels: np.ndarray, sample_weights: Optional[np.ndarray] = None
) -> Node:
    """Weighted mean cross-entropy over the batch, as a scalar node.

    Weights multiply per-sample terms and the sum divides by the batch
    size, so weights that average to one keep the loss scale of the
    unweighted mean.
    """
    n, c = logits.value.shape
    ce, probs = _ce_terms(logits.value, labels)
    sw = np.ones(n, dtype=logits.value.dtype) if sample_weights is None else sample_weights
    loss = np.asarray((ce * sw).sum() / n, dtype=logits.value.dtype)

    def vjp(g):
        dz = probs - _onehot(labels, c, probs.dtype)
        dz *= (sw / n)[:, None]
        return (dz * g,)

    return Node(loss, (logits,), vjp)


def attenuated_ce_value(
    logits: np.ndarray,
    log_var: np.ndarray,
    labels: np.ndarray,
    eps_noise: np.ndarray,
    sample_weights: Optional[np.ndarray] = None,
) -> float:
    """Value-only twin of attenuated_ce_node (same corruption scheme)."""
    sigma = np.exp(0.5 * log_var)
    if not np.isfinite(sigma).all():
        raise ValueError("non-finite sigma in attenuated loss")
    if not sigma.any():
        return ce_loss_value(logits, labels, sample_weights)
    z = logits[None, :, :] + sigma[None, :, :] * eps_noise
    ce, _ = _ce_terms(z, labels)
    if sample_weights is not None:
        ce = ce * sample_weights
    return float(ce.mean())


def attenuated_ce_node(
    logits: Node,
    log_var: Node,
    labels: np.ndarray,
    eps_noise: np.ndarray,
    sample_weights: Optional[np.ndarray] = None,
) -> Node:
    """Noise-attenuated classification loss.

    Corrupts the logits with ``sigma * eps`` per noise draw, where
    ``sigma = exp(log_var / 2)``, and averages the weighted
    cross-entropy over draws: samples the head assigns high variance
    are down-weighted because their corrupted softmax flattens.  When
    sigma is exactly zero everywhere this reduces bitwise to the plain
    cross-entropy and the log-variance gradient is exactly zero.
    """
    s_draws, n, c = eps_noise.shape
    if logits.value.shape != (n, c) or log_var.value.shape != (n, c):
        raise ValueError(
            f"logits {logits.value.shape}, log_var {log_var.value.shape} and "
            f"noise {eps_noise.shape} disagree"
        )
    sigma = np.exp(0.5 * log_var.value)
    if not np.isfinite(sigma).all():
        raise ValueError("non-finite sigma in attenuated loss")
    sw = np.ones(n, dtype=logits.value.dtype) if sample_weights is None else sample_weights

    if not sigma.any():
        inner = ce_loss_node(logits, labels, sw)

        def vjp_zero(g):
            return inner.vjp(g)[0], np.zeros_like(log_var.value)

        return Node(inner.value, (logits, log_var), vjp_zero)

    z = logits.value[None, :, :] + sigma[None, :, :] * eps_noise
    ce, probs = _ce_terms(z, labels)
    loss = np.asarray((ce * sw).sum() / (s_draws * n), dtype=logits.value.dtype)
    onehot = _onehot(labels, c, probs.dtype)

    def vjp(g):
        dz = probs - onehot[None, :, :]
        dz *= (sw / (s_draws * n))[None, :, None]
        dlogits = dz.sum(axis=0)
        dsigma = (dz * eps_noise).sum(axis=0)
        dlog_var = dsigma * (0.5 * sigma)
        return dlogits * g, dlog_var * g

    return Node(loss, (logits, log_var), vjp)
