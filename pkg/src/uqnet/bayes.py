"""Monte-Carlo-dropout inference and the attenuated classification loss.

A trained network is sampled T times with dropout left on; the spread
of the T softmax outputs estimates epistemic uncertainty, while the
log-variance head (when present) contributes an aleatoric scale.  The
per-class total uncertainty answers "how uncertain is this member
that the sample belongs to class l": the distance to certainty
(1 - mean probability of l) combined in quadrature with the epistemic
spread and the aleatoric scale.  The distance term is what lets
inverse-uncertainty fusion discriminate classes at all: for a
two-class softmax the per-pass probabilities are complementary, so
the epistemic spread is identical for both classes, and the
cross-entropy depends only on the logit difference, leaving the two
aleatoric scales interchangeable — neither component alone orders the
classes.  Totals are floored at U_FLOOR so downstream
inverse-uncertainty weighting never divides by zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .nn import NetworkConfig, ParameterSet, build_graph, make_dropout_masks
from .nn.ops import attenuated_ce_value, softmax
from .rng import as_generator

U_FLOOR = 1e-6


@dataclass(frozen=True)
class PredictiveDistribution:
    """Statistics of T stochastic forward passes for one sample."""

    mean_probs: np.ndarray
    epistemic_std: np.ndarray
    aleatoric_scale: Optional[np.ndarray]
    total_uncertainty: np.ndarray
    T: int


def attenuated_loss(
    logits,
    log_var,
    labels,
    n_noise_samples: int,
    rng_seed,
    sample_weights=None,
) -> float:
    """Mean over noise draws of CE(softmax(logits + sigma*eps), labels).

    sigma = exp(log_var / 2).  Accepts one sample (shape (c,)) or a
    batch (n, c); reduces exactly to the plain cross-entropy when
    sigma is zero everywhere.
    """
    if n_noise_samples < 1:
        raise ValueError("n_noise_samples must be >= 1")
    z = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    lv = np.atleast_2d(np.asarray(log_var, dtype=np.float64))
    y = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if z.shape != lv.shape or y.shape[0] != z.shape[0]:
        raise ValueError(
            f"shapes disagree: logits {z.shape}, log_var {lv.shape}, "
            f"labels {y.shape}"
        )
    rng = as_generator(rng_seed)
    eps = rng.standard_normal((n_noise_samples,) + z.shape)
    return attenuated_ce_value(z, lv, y, eps, sample_weights)


def predictive_from_samples(
    probs: np.ndarray, sigmas: Optional[np.ndarray] = None
) -> PredictiveDistribution:
    """Reduce T per-pass outputs to a PredictiveDistribution.

    probs: (T, c) softmax vectors; sigmas: (T, c) per-pass aleatoric
    scales or None.  Epistemic spread uses the n-1 denominator.
    """
    probs = np.asarray(probs)
    t = probs.shape[0]
    if t < 2:
        raise ValueError(f"need at least 2 MC samples, got {t}")
    if np.all(probs == probs[:1]):
        # All passes identical (e.g. dropout rate 0): the spread is
        # exactly zero, with no accumulated-mean rounding residue.
        mean_probs = probs[0].copy()
        epistemic = np.zeros_like(mean_probs)
    else:
        mean_probs = probs.mean(axis=0)
        epistemic = probs.std(axis=0, ddof=1)
    aleatoric = None if sigmas is None else np.asarray(sigmas).mean(axis=0)
    distance = 1.0 - mean_probs
    if aleatoric is None:
        total = np.sqrt(distance**2 + epistemic**2)
    else:
        total = np.sqrt(distance**2 + epistemic**2 + aleatoric**2)
    total = np.maximum(total, U_FLOOR)
    return PredictiveDistribution(mean_probs, epistemic, aleatoric, total, t)


def mc_predict_batch(
    cfg: NetworkConfig,
    pset: ParameterSet,
    batch: np.ndarray,
    T: Optional[int] = None,
    rng_seed=None,
) -> list:
    """One PredictiveDistribution per sample from T shared-mask passes.

    Each pass draws one feature-shaped dropout mask set applied to the
    whole batch, so sample i's distribution is a pure function of
    (params, sample i, seed): batching with other samples never
    changes it.  BN always uses running statistics.
    """
    t = cfg.mc_samples_T if T is None else T
    if t < 2:
        raise ValueError(f"mc_predict needs T >= 2, got {t}")
    rng = as_generator(rng_seed)
    n = batch.shape[0]
    probs = np.empty((t, n, cfg.n_outputs))
    sigmas = np.empty((t, n, cfg.n_outputs)) if cfg.heteroscedastic else None
    n_real_passes = t if cfg.dropout_rate > 0.0 else 1
    for i in range(n_real_passes):
        masks = None
        if cfg.dropout_rate > 0.0:
            masks = make_dropout_masks(cfg, rng, batch=None, dtype=batch.dtype)
        logits, log_var, _, _ = build_graph(
            cfg, pset, batch, bn_train=False, masks=masks
        )
        probs[i] = softmax(logits.value)
        if sigmas is not None:
            sigmas[i] = np.exp(0.5 * log_var.value)
    # Without dropout every pass is the same; replicate instead of
    # recomputing.
    probs[n_real_passes:] = probs[0]
    if sigmas is not None:
        sigmas[n_real_passes:] = sigmas[0]
    return [
        predictive_from_samples(
            probs[:, j], None if sigmas is None else sigmas[:, j]
        )
        for j in range(n)
    ]


def mc_predict(
    cfg: NetworkConfig,
    pset: ParameterSet,
    sample: np.ndarray,
    T: Optional[int] = None,
    rng_seed=None,
) -> PredictiveDistribution:
    """MC-dropout predictive distribution for one (h, w, c) sample."""
    x = np.asarray(sample)
    if x.ndim == 2:
        x = x[:, :, None]
    if x.ndim != 3:
        raise ValueError(f"expected one (h, w, c) sample, got shape {x.shape}")
    return mc_predict_batch(cfg, pset, x[None], T, rng_seed)[0]
