"""Differentiable network engine."""

from .adam import AdamConfig, adam_step
from .checkpoint import load_checkpoint, save_checkpoint
from .network import (
    KernelBank,
    LossSpec,
    NetworkConfig,
    ParameterSet,
    backward,
    build_graph,
    conv2d,
    dropout_forward,
    forward,
    init_params,
    make_dropout_masks,
)
from .ops import softmax

__all__ = [
    "AdamConfig",
    "KernelBank",
    "LossSpec",
    "NetworkConfig",
    "ParameterSet",
    "adam_step",
    "backward",
    "build_graph",
    "conv2d",
    "dropout_forward",
    "forward",
    "init_params",
    "load_checkpoint",
    "make_dropout_masks",
    "save_checkpoint",
    "softmax",
]
