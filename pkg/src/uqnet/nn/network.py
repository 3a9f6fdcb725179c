"""Network definition: configuration, parameters, forward and backward.

The architecture is a small residual classifier parameterized by
kernel size and a per-stage channel list:

    stem conv (same padding) -> BN -> ReLU -> 2x2 avg pool
    per stage: [1x1 transition conv -> BN -> ReLU -> pool, from stage 2]
               residual block (conv-BN-ReLU-conv-BN, skip add, ReLU)
               dropout
    global average pool -> dropout -> dense logits head
    [dense log-variance head when heteroscedastic]

Dropout placement (after every residual block and before the dense
head) and the stage/channel shape are configurable; the binary heads
always end in ``n_outputs`` logits for a softmax.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..rng import as_generator
from . import ops
from .autodiff import Node, backward as tape_backward, leaf


@dataclass(frozen=True)
class KernelBank:
    """One convolution layer's weights (p, q, c_in, k) and bias (k,)."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        if self.weights.ndim != 4:
            raise ValueError(f"kernel weights must be 4-D, got {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[3],):
            raise ValueError(
                f"bias shape {self.bias.shape} does not match "
                f"{self.weights.shape[3]} kernels"
            )


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture description; see the module docstring for the layout."""

    input_side: int = 32
    kernel_size: int = 3
    n_residual_blocks: int = 2
    channels_per_stage: tuple = (8, 16)
    dropout_rate: float = 0.2
    mc_samples_T: int = 30
    heteroscedastic: bool = True
    n_outputs: int = 2
    in_channels: int = 1
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5

    def __post_init__(self):
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd, got {self.kernel_size}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.n_residual_blocks < 1:
            raise ValueError("need at least one residual block")
        if len(self.channels_per_stage) != self.n_residual_blocks:
            raise ValueError(
                f"{self.n_residual_blocks} blocks need "
                f"{self.n_residual_blocks} channel entries, got "
                f"{self.channels_per_stage}"
            )
        if self.mc_samples_T < 2:
            raise ValueError("mc_samples_T must be at least 2")
        # One pool after the stem plus one per transition.
        shrink = 2 ** self.n_residual_blocks
        if self.input_side % shrink or self.input_side < shrink:
            raise ValueError(
                f"input_side {self.input_side} must be a positive multiple "
                f"of {shrink} for {self.n_residual_blocks} pooled stages"
            )

    @property
    def stage_sides(self) -> tuple:
        side = self.input_side
        sides = []
        for _ in range(self.n_residual_blocks):
            side //= 2
            sides.append(side)
        return tuple(sides)


@dataclass
class ParameterSet:
    """Trainable parameters, BN running statistics and Adam state.

    ``params`` iteration order is the canonical parameter order; every
    consumer (optimizer, checkpoints, gradient dicts) follows it.
    """

    params: dict
    running: dict
    m: dict
    v: dict
    step: int = 0

    def clone(self) -> "ParameterSet":
        return ParameterSet(
            {k: a.copy() for k, a in self.params.items()},
            {k: a.copy() for k, a in self.running.items()},
            {k: a.copy() for k, a in self.m.items()},
            {k: a.copy() for k, a in self.v.items()},
            self.step,
        )


@dataclass(frozen=True)
class LossSpec:
    """Which loss backward() differentiates.

    kind: "ce" or "attenuated".  sample_weights: per-sample weight
    vector (class weights indexed by label), or None for uniform.
    Attenuated losses draw ``n_noise_samples`` logit corruptions from
    ``rng_seed``.
    """

    kind: str = "ce"
    sample_weights: Optional[np.ndarray] = None
    n_noise_samples: int = 20
    rng_seed: object = None

    def __post_init__(self):
        if self.kind not in ("ce", "attenuated"):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.n_noise_samples < 1:
            raise ValueError("n_noise_samples must be >= 1")


def _conv_names(cfg: NetworkConfig):
    """Conv layer names with (kernel_side, c_in, c_out) in creation order."""
    chans = cfg.channels_per_stage
    k = cfg.kernel_size
    out = [("stem", k, cfg.in_channels, chans[0])]
    for i in range(cfg.n_residual_blocks):
        c = chans[i]
        if i > 0:
            out.append((f"t{i}", 1, chans[i - 1], c))
        out.append((f"s{i}.c1", k, c, c))
        out.append((f"s{i}.c2", k, c, c))
    return out


def _bn_specs(cfg: NetworkConfig):
    """(bn_name, n_channels) pairs in creation order."""
    chans = cfg.channels_per_stage
    out = [("stem.bn", chans[0])]
    for i in range(cfg.n_residual_blocks):
        if i > 0:
            out.append((f"t{i}.bn", chans[i]))
        out.append((f"s{i}.bn1", chans[i]))
        out.append((f"s{i}.bn2", chans[i]))
    return out


def init_params(cfg: NetworkConfig, seed, dtype=np.float32) -> ParameterSet:
    """He-uniform convolution/dense init, identity BN, zero moments.

    The log-variance head starts with bias -3 so early training runs
    near the plain cross-entropy regime (sigma ~ 0.22) instead of
    drowning the logits in noise.
    """
    rng = as_generator(seed)
    params: dict = {}
    running: dict = {}

    def he_uniform(shape, fan_in):
        limit = np.sqrt(6.0 / fan_in)
        return rng.uniform(-limit, limit, size=shape).astype(dtype)

    for name, side, cin, cout in _conv_names(cfg):
        params[f"{name}.w"] = he_uniform((side, side, cin, cout), side * side * cin)
        params[f"{name}.b"] = np.zeros(cout, dtype=dtype)
    for name, ch in _bn_specs(cfg):
        params[f"{name}.gamma"] = np.ones(ch, dtype=dtype)
        params[f"{name}.beta"] = np.zeros(ch, dtype=dtype)
        running[f"{name}.mean"] = np.zeros(ch, dtype=dtype)
        running[f"{name}.var"] = np.ones(ch, dtype=dtype)

    feat = cfg.channels_per_stage[-1]
    params["head.w"] = he_uniform((feat, cfg.n_outputs), feat)
    params["head.b"] = np.zeros(cfg.n_outputs, dtype=dtype)
    if cfg.heteroscedastic:
        params["lv.w"] = he_uniform((feat, cfg.n_outputs), feat)
        params["lv.b"] = np.full(cfg.n_outputs, -3.0, dtype=dtype)

    m = {k: np.zeros_like(a) for k, a in params.items()}
    v = {k: np.zeros_like(a) for k, a in params.items()}
    return ParameterSet(params, running, m, v, step=0)


def make_dropout_masks(
    cfg: NetworkConfig, rng, *, batch: Optional[int], dtype=np.float32
) -> dict:
    """Inverted-dropout masks for every dropout site, in a fixed order.

    ``batch=None`` draws feature-shaped masks with a leading broadcast
    axis, shared by every sample in a batch: an MC-inference pass then
    gives each sample an output independent of what else sits in the
    batch.  Training passes draw per-sample masks instead.
    """
    rate = cfg.dropout_rate
    masks = {}
    lead = 1 if batch is None else batch
    keep = 1.0 - rate
    sides = cfg.stage_sides
    for i in range(cfg.n_residual_blocks):
        shape = (lead, sides[i], sides[i], cfg.channels_per_stage[i])
        masks[f"s{i}.drop"] = _draw_mask(rng, shape, rate, keep, dtype)
    masks["head.drop"] = _draw_mask(
        rng, (lead, cfg.channels_per_stage[-1]), rate, keep, dtype
    )
    return masks


def _draw_mask(rng, shape, rate, keep, dtype):
    survive = rng.random(shape) >= rate
    return survive.astype(dtype) / np.asarray(keep, dtype=dtype)


def build_graph(
    cfg: NetworkConfig,
    pset: ParameterSet,
    batch: np.ndarray,
    *,
    bn_train: bool,
    masks: Optional[dict] = None,
):
    """Build the forward graph on a (n, side, side, c) batch.

    Returns (logits node, log-variance node or None, parameter-name ->
    leaf node dict, updated running-stat dict).  Every layer output is
    checked finite and reported by layer name on failure.
    """
    n, h, wd, c = batch.shape
    if h != cfg.input_side or wd != cfg.input_side or c != cfg.in_channels:
        raise ValueError(
            f"batch shape {batch.shape} does not match configured "
            f"{cfg.input_side}x{cfg.input_side}x{cfg.in_channels} input"
        )
    p = {name: leaf(arr) for name, arr in pset.params.items()}
    new_running = dict(pset.running)
    x = leaf(batch)

    def bn(node, name):
        out, mean, var = ops.batchnorm_node(
            node,
            p[f"{name}.gamma"],
            p[f"{name}.beta"],
            pset.running[f"{name}.mean"],
            pset.running[f"{name}.var"],
            train=bn_train,
            momentum=cfg.bn_momentum,
            eps=cfg.bn_eps,
        )
        new_running[f"{name}.mean"] = mean
        new_running[f"{name}.var"] = var
        ops.check_finite(out.value, name)
        return out

    def conv(node, name, padding="same"):
        out = ops.conv2d_node(node, p[f"{name}.w"], p[f"{name}.b"], padding)
        ops.check_finite(out.value, name)
        return out

    def drop(node, name):
        if masks is None or name not in masks:
            return node
        return ops.dropout_node(node, masks[name])

    x = ops.relu_node(bn(conv(x, "stem"), "stem.bn"))
    x = ops.avgpool2_node(x)
    for i in range(cfg.n_residual_blocks):
        if i > 0:
            x = ops.relu_node(bn(conv(x, f"t{i}"), f"t{i}.bn"))
            x = ops.avgpool2_node(x)
        skip = x
        y = ops.relu_node(bn(conv(x, f"s{i}.c1"), f"s{i}.bn1"))
        y = bn(conv(y, f"s{i}.c2"), f"s{i}.bn2")
        x = ops.relu_node(ops.add_node(y, skip))
        x = drop(x, f"s{i}.drop")
    x = ops.gap_node(x)
    x = drop(x, "head.drop")
    logits = ops.dense_node(x, p["head.w"], p["head.b"])
    ops.check_finite(logits.value, "head")
    log_var = None
    if cfg.heteroscedastic:
        log_var = ops.dense_node(x, p["lv.w"], p["lv.b"])
        ops.check_finite(log_var.value, "lv")
    return logits, log_var, p, new_running


def forward(
    cfg: NetworkConfig,
    pset: ParameterSet,
    batch: np.ndarray,
    dropout_mode: str = "off",
    rng=None,
):
    """Inference forward pass: (logits, log_var or None).

    Uses BN running statistics.  ``dropout_mode="stochastic"`` draws
    one batch-shared mask per dropout site from ``rng`` (see
    make_dropout_masks), so each sample's output depends only on
    (params, input, draw), never on the rest of the batch.
    """
    if dropout_mode not in ("off", "stochastic"):
        raise ValueError(f"unknown dropout_mode {dropout_mode!r}")
    masks = None
    if dropout_mode == "stochastic" and cfg.dropout_rate > 0.0:
        if rng is None:
            raise ValueError("stochastic dropout needs an rng")
        masks = make_dropout_masks(
            cfg, as_generator(rng), batch=None, dtype=batch.dtype
        )
    logits, log_var, _, _ = build_graph(cfg, pset, batch, bn_train=False, masks=masks)
    return logits.value, (log_var.value if log_var is not None else None)


def backward(
    cfg: NetworkConfig,
    pset: ParameterSet,
    batch: np.ndarray,
    labels: np.ndarray,
    loss: LossSpec,
):
    """Loss value and gradient dict for one deterministic pass.

    Dropout is disabled here so the result is a pure function of the
    inputs; the training loop injects stochastic masks through
    build_graph directly.  BN uses batch statistics (training
    semantics).  Parameters the loss never touches get exact zero
    gradients.
    """
    logits, log_var, p, _ = build_graph(cfg, pset, batch, bn_train=True, masks=None)
    loss_node = _loss_node(cfg, logits, log_var, labels, loss)
    tape_backward(loss_node)
    grads = {
        name: (node.grad if node.grad is not None else np.zeros_like(node.value))
        for name, node in p.items()
    }
    return float(loss_node.value), grads


def _loss_node(cfg, logits, log_var, labels, loss: LossSpec) -> Node:
    if loss.kind == "ce":
        return ops.ce_loss_node(logits, labels, loss.sample_weights)
    if log_var is None:
        raise ValueError("attenuated loss needs a heteroscedastic network")
    rng = as_generator(loss.rng_seed)
    eps = rng.standard_normal(
        (loss.n_noise_samples,) + logits.value.shape
    ).astype(logits.value.dtype)
    return ops.attenuated_ce_node(logits, log_var, labels, eps, loss.sample_weights)


def conv2d(image: np.ndarray, bank: KernelBank, padding: str = "valid") -> np.ndarray:
    """Convolve one (h, w, c) image with a kernel bank.

    Same flipped-kernel orientation as the network layers; returns
    (h', w', k).
    """
    img = np.asarray(image)
    if img.ndim != 3:
        raise ValueError(f"expected (h, w, c) image, got shape {img.shape}")
    node = ops.conv2d_node(
        leaf(img[None]), leaf(bank.weights), leaf(bank.bias), padding
    )
    return node.value[0]


def dropout_forward(
    input_tensor: np.ndarray, rate: float, mode: str = "off", rng_seed=None
) -> np.ndarray:
    """Inverted dropout on a plain tensor.

    mode "off" (or rate 0) returns the input unchanged; "stochastic"
    zeroes each element independently with probability ``rate`` and
    scales survivors by 1/(1-rate).
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if mode not in ("off", "stochastic"):
        raise ValueError(f"unknown dropout mode {mode!r}")
    x = np.asarray(input_tensor)
    if mode == "off" or rate == 0.0:
        return x.copy()
    rng = as_generator(rng_seed)
    mask = _draw_mask(rng, x.shape, rate, 1.0 - rate, x.dtype if x.dtype.kind == "f" else np.float64)
    return x * mask
