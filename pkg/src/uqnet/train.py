"""Single-member training loop.

Trains one network on one binary task with mini-batch Adam, inverted
dropout, batch-statistics BN and either the plain or the attenuated
cross-entropy, holding out a validation slice for per-epoch reporting.
All stochasticity (weight init, the validation split, epoch shuffles,
dropout masks, attenuation noise) is drawn from one generator in a
fixed order, so a given (data, config, seed) reproduces the exact
parameter trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import (
    AdamConfig,
    NetworkConfig,
    adam_step,
    build_graph,
    forward,
    init_params,
    make_dropout_masks,
)
from .nn.autodiff import backward as tape_backward
from .nn import ops
from .rng import as_generator


@dataclass(frozen=True)
class TrainSettings:
    epochs: int
    batch_size: int = 32
    val_fraction: float = 0.1
    n_noise_samples: int = 20

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in [0, 1)")


def train_member(
    cfg: NetworkConfig,
    x: np.ndarray,
    y: np.ndarray,
    *,
    settings: TrainSettings,
    adam_cfg: AdamConfig,
    rng_seed,
    class_weight_vec=None,
):
    """Train one member; returns (ParameterSet, per-epoch history).

    ``x``: (n, side, side, c) preprocessed inputs; ``y``: (n,) class
    indices.  ``class_weight_vec`` holds one weight per class, applied
    per sample inside the loss.  The loss is the attenuated
    cross-entropy when the config is heteroscedastic, else plain
    cross-entropy.
    """
    n = x.shape[0]
    if n != len(y):
        raise ValueError(f"{n} inputs but {len(y)} labels")
    y = np.asarray(y)
    if y.size and (y.min() < 0 or y.max() >= cfg.n_outputs):
        raise ValueError(
            f"labels must lie in [0, {cfg.n_outputs}), got range "
            f"[{y.min()}, {y.max()}]"
        )
    rng = as_generator(rng_seed)
    pset = init_params(cfg, rng, dtype=x.dtype)

    n_val = int(round(n * settings.val_fraction))
    perm = rng.permutation(n)
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    if len(train_idx) == 0:
        raise ValueError("validation split leaves no training samples")
    x_val, y_val = x[val_idx], y[val_idx]

    weights_of = None
    if class_weight_vec is not None:
        weights_of = np.asarray(class_weight_vec, dtype=x.dtype)

    history = []
    for epoch in range(settings.epochs):
        order = train_idx[rng.permutation(len(train_idx))]
        losses = []
        for start in range(0, len(order), settings.batch_size):
            idx = order[start : start + settings.batch_size]
            loss_value, pset = _train_step(
                cfg, pset, x[idx], y[idx], rng, settings, adam_cfg, weights_of
            )
            losses.append(loss_value)
        row = {"epoch": epoch + 1, "loss": float(np.mean(losses))}
        if n_val:
            row.update(_validate(cfg, pset, x_val, y_val, weights_of))
        history.append(row)
    return pset, history


def _train_step(cfg, pset, xb, yb, rng, settings, adam_cfg, weights_of):
    masks = None
    if cfg.dropout_rate > 0.0:
        masks = make_dropout_masks(cfg, rng, batch=xb.shape[0], dtype=xb.dtype)
    logits, log_var, pnodes, new_running = build_graph(
        cfg, pset, xb, bn_train=True, masks=masks
    )
    sw = None if weights_of is None else weights_of[yb]
    if cfg.heteroscedastic:
        eps = rng.standard_normal(
            (settings.n_noise_samples,) + logits.value.shape
        ).astype(xb.dtype)
        loss_node = ops.attenuated_ce_node(logits, log_var, yb, eps, sw)
    else:
        loss_node = ops.ce_loss_node(logits, yb, sw)
    tape_backward(loss_node)
    grads = {
        name: (node.grad if node.grad is not None else np.zeros_like(node.value))
        for name, node in pnodes.items()
    }
    new_pset = adam_step(pset, grads, adam_cfg)
    new_pset.running = new_running
    return float(loss_node.value), new_pset


def _validate(cfg, pset, x_val, y_val, weights_of):
    logits, _ = forward(cfg, pset, x_val, dropout_mode="off")
    sw = None if weights_of is None else weights_of[y_val]
    val_loss = ops.ce_loss_value(logits, y_val, sw)
    val_acc = float(np.mean(np.argmax(logits, axis=1) == y_val))
    return {"val_loss": val_loss, "val_acc": val_acc}
