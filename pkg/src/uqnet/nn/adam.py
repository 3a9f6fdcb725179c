"""Adam optimizer with decoupled weight decay."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import ParameterSet


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.001

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            raise ValueError("beta1 and beta2 must lie in [0, 1)")


def adam_step(pset: ParameterSet, grads: dict, cfg: AdamConfig) -> ParameterSet:
    """One bias-corrected Adam update; returns a new ParameterSet.

    Weight decay is decoupled (applied directly to the parameter, not
    through the moments) and uniform across all trainable parameters.
    Running BN statistics pass through untouched.
    """
    t = pset.step + 1
    lr = cfg.learning_rate
    bc1 = 1.0 - cfg.beta1**t
    bc2 = 1.0 - cfg.beta2**t
    new_params, new_m, new_v = {}, {}, {}
    for name, p in pset.params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(
                f"gradient shape {g.shape} does not match parameter "
                f"'{name}' shape {p.shape}"
            )
        m = cfg.beta1 * pset.m[name] + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * pset.v[name] + (1.0 - cfg.beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        step = lr * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
        if cfg.weight_decay:
            step = step + lr * cfg.weight_decay * p
        new_params[name] = (p - step).astype(p.dtype, copy=False)
        new_m[name] = m.astype(p.dtype, copy=False)
        new_v[name] = v.astype(p.dtype, copy=False)
    return ParameterSet(new_params, dict(pset.running), new_m, new_v, step=t)
