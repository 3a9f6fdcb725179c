"""Hierarchical one-versus-all routing with quadrature uncertainty.

A chain of binary deciders: at each level, class 0 stops at that
level's leaf label and class 1 continues; the last level's class 1 is
itself a leaf.  The default three-level chain separates controls from
pneumonia, bacterial from viral pneumonia, and non-COVID from COVID
viral pneumonia.  A route's combined uncertainty is the root sum of
squares of the per-level uncertainties along the path, each weighted
by a sensitivity coefficient (1 by default).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ensemble import EnsembleDecision

LABELS = ("CTL", "BAC", "VIR_NO_COVID", "COVID")


@dataclass(frozen=True)
class TreeSpec:
    """levels: (node_name, leaf_label_when_class_0); the final level's
    class 1 lands on final_label."""

    levels: tuple = (
        ("ctl_vs_pneu", "CTL"),
        ("bac_vs_vir", "BAC"),
        ("no_covid_vs_covid", "VIR_NO_COVID"),
    )
    final_label: str = "COVID"
    sensitivities: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if not self.levels:
            raise ValueError("tree needs at least one level")
        if len(self.sensitivities) != len(self.levels):
            raise ValueError(
                f"{len(self.levels)} levels need {len(self.levels)} "
                f"sensitivities, got {len(self.sensitivities)}"
            )

    @property
    def leaf_labels(self) -> tuple:
        return tuple(leaf for _, leaf in self.levels) + (self.final_label,)


DEFAULT_TREE = TreeSpec()


@dataclass(frozen=True)
class TreeRoute:
    """Decisions taken for one sample, ending at final_label.

    steps: (node_name, EnsembleDecision, level_uncertainty) per level
    traversed; the level uncertainty is the ensemble uncertainty of
    the class chosen at that level.
    """

    steps: tuple
    final_label: str
    combined_uncertainty: float


def combined_uncertainty(
    level_uncertainties: Sequence[float], sensitivities: Sequence[float]
) -> float:
    """Root sum of squares of sensitivity-weighted uncertainties."""
    u = np.asarray(level_uncertainties, dtype=np.float64)
    c = np.asarray(sensitivities, dtype=np.float64)
    if u.shape != c.shape:
        raise ValueError(
            f"{u.shape[0]} uncertainties but {c.shape[0]} sensitivities"
        )
    if (u < 0).any():
        raise ValueError("uncertainties must be non-negative")
    return float(np.sqrt(((c * u) ** 2).sum()))


def route_from_decisions(
    decisions: Sequence[EnsembleDecision], tree: TreeSpec = DEFAULT_TREE
) -> TreeRoute:
    """Route one sample given its per-level binary decisions.

    Decisions for levels below the first stop are ignored; routing is
    a pure function of the decision sequence.
    """
    if len(decisions) != len(tree.levels):
        raise ValueError(
            f"tree has {len(tree.levels)} levels but {len(decisions)} "
            f"decisions were supplied"
        )
    steps = []
    uncertainties = []
    label = tree.final_label
    for (node_name, negative_leaf), decision in zip(tree.levels, decisions):
        level_u = float(decision.ensemble_uncertainty[decision.label])
        steps.append((node_name, decision, level_u))
        uncertainties.append(level_u)
        if decision.label == 0:
            label = negative_leaf
            break
    u_c = combined_uncertainty(
        uncertainties, tree.sensitivities[: len(uncertainties)]
    )
    return TreeRoute(tuple(steps), label, u_c)


def route(sample, level_classifiers, tree: TreeSpec = DEFAULT_TREE) -> TreeRoute:
    """Route one sample through callable level classifiers.

    ``level_classifiers[i](sample)`` must return the EnsembleDecision
    of level i; one classifier per level is required up front, even
    though early exits may leave later ones uncalled.
    """
    if len(level_classifiers) != len(tree.levels):
        raise ValueError(
            f"tree has {len(tree.levels)} levels but "
            f"{len(level_classifiers)} classifiers were supplied"
        )
    steps = []
    uncertainties = []
    label = tree.final_label
    for (node_name, negative_leaf), classify in zip(tree.levels, level_classifiers):
        decision = classify(sample)
        level_u = float(decision.ensemble_uncertainty[decision.label])
        steps.append((node_name, decision, level_u))
        uncertainties.append(level_u)
        if decision.label == 0:
            label = negative_leaf
            break
    u_c = combined_uncertainty(
        uncertainties, tree.sensitivities[: len(uncertainties)]
    )
    return TreeRoute(tuple(steps), label, u_c)


def multiclass_predict(
    batch: Sequence, level_classifiers, tree: TreeSpec = DEFAULT_TREE
) -> list:
    """One TreeRoute per sample, in batch order."""
    return [route(sample, level_classifiers, tree) for sample in batch]
