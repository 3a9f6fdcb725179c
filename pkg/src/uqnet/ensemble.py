"""Inverse-uncertainty fusion of kernel-size ensemble members.

Each member reports a per-class uncertainty vector; the ensemble score
of class l is the mean of the members' inverse uncertainties, the
winning label is the argmax score (ties to the lowest index), and the
ensemble's own per-class uncertainty is the reciprocal score (a
harmonic-mean-style aggregate that rewards confident members).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .nn import NetworkConfig

PAPER_BANK = (3, 5, 7, 9, 11, 13, 15)
DESK_BANK = (3, 5, 7)


@dataclass(frozen=True)
class MemberPrediction:
    """One member's view of one sample."""

    member_id: str
    kernel_size: int
    mean_probs: np.ndarray
    uncertainties: np.ndarray


@dataclass(frozen=True)
class EnsembleDecision:
    """Fused scores, chosen label and the member breakdown."""

    scores: np.ndarray
    label: int
    members: tuple
    ensemble_uncertainty: np.ndarray


def ensemble_scores(members: Sequence[MemberPrediction]) -> np.ndarray:
    """Per-class mean of members' inverse uncertainties."""
    if not members:
        raise ValueError("ensemble needs at least one member")
    n_classes = len(members[0].uncertainties)
    inv_sum = np.zeros(n_classes, dtype=np.float64)
    for m in members:
        u = np.asarray(m.uncertainties, dtype=np.float64)
        if u.shape != (n_classes,):
            raise ValueError(
                f"member {m.member_id}: {u.shape[0]} classes, expected {n_classes}"
            )
        if not (u > 0).all():
            raise ValueError(
                f"member {m.member_id}: uncertainties must be strictly positive"
            )
        inv_sum += 1.0 / u
    return inv_sum / len(members)


def ensemble_label(scores: np.ndarray) -> int:
    """Argmax class; ties resolve to the lowest index."""
    scores = np.asarray(scores)
    if scores.size == 0:
        raise ValueError("no class scores")
    return int(np.argmax(scores))


def ensemble_uncertainty(members: Sequence[MemberPrediction]) -> np.ndarray:
    """Per-class ensemble uncertainty: the reciprocal of the score."""
    return 1.0 / ensemble_scores(members)


def fuse(members: Sequence[MemberPrediction]) -> EnsembleDecision:
    scores = ensemble_scores(members)
    return EnsembleDecision(
        scores=scores,
        label=ensemble_label(scores),
        members=tuple(members),
        ensemble_uncertainty=1.0 / scores,
    )


def build_bank(
    base_config: NetworkConfig, kernel_sizes: Sequence[int]
) -> list:
    """Configs identical to the base except for kernel size."""
    if not kernel_sizes:
        raise ValueError("need at least one kernel size")
    for k in kernel_sizes:
        if k < 3 or k % 2 == 0:
            raise ValueError(f"kernel sizes must be odd and >= 3, got {k}")
    return [replace(base_config, kernel_size=int(k)) for k in kernel_sizes]
