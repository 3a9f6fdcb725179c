"""Uncertainty-weighted ensembles of Bayesian convolutional classifiers.

A small, dependency-light library plus CLI that

- trains convolutional classifiers with Monte Carlo dropout and a
  heteroscedastic (attenuated) loss on a from-scratch differentiable
  network engine (`uqnet.nn`),
- fuses members of different kernel sizes by inverse-uncertainty
  weighting (`uqnet.ensemble`),
- routes samples through a hierarchical one-versus-all decision tree
  whose per-level uncertainties combine in quadrature (`uqnet.tree`),
- and evaluates everything with stratified cross-validation, Cohen's
  kappa, ROC/AUC and kappa-uncertainty diagrams (`uqnet.metrics`).

Array kernels run on either a pure-NumPy backend or a Numba-compiled
one; see `uqnet.kernels`.
"""

from .bayes import PredictiveDistribution, attenuated_loss, mc_predict, mc_predict_batch
from .ensemble import (
    EnsembleDecision,
    MemberPrediction,
    build_bank,
    ensemble_label,
    ensemble_scores,
    ensemble_uncertainty,
    fuse,
)
from .metrics import (
    binary_metrics,
    class_weights,
    cohen_kappa,
    kappa_uncertainty_table,
    multiclass_report,
    roc_curve_auc,
    stratified_folds,
)
from .tree import DEFAULT_TREE, LABELS, TreeSpec, combined_uncertainty, multiclass_predict, route

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_TREE",
    "EnsembleDecision",
    "LABELS",
    "MemberPrediction",
    "PredictiveDistribution",
    "TreeSpec",
    "attenuated_loss",
    "binary_metrics",
    "build_bank",
    "class_weights",
    "cohen_kappa",
    "combined_uncertainty",
    "ensemble_label",
    "ensemble_scores",
    "ensemble_uncertainty",
    "fuse",
    "kappa_uncertainty_table",
    "mc_predict",
    "mc_predict_batch",
    "multiclass_predict",
    "multiclass_report",
    "roc_curve_auc",
    "route",
    "stratified_folds",
    "__version__",
]
