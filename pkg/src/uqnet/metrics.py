"""Evaluation suite: confusion metrics, Cohen's kappa, ROC/AUC,
stratified folds, class weights and kappa-uncertainty tables.

Two quantities both called "AUC" in the wild are kept separate here:
``auc_balanced`` is the balanced accuracy (Sens + Spec) / 2 computed
from confusion counts, and ``roc_auc`` is the trapezoid area under the
ROC curve.  Metrics whose denominator is empty are reported as None
(absent), never as 0, so fold averages are not silently corrupted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .rng import as_generator


@dataclass(frozen=True)
class ConfusionCounts:
    """Binary confusion counts; positives are class 1."""

    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @classmethod
    def from_pairs(cls, y_true, y_pred) -> "ConfusionCounts":
        yt = np.asarray(y_true).astype(bool)
        yp = np.asarray(y_pred).astype(bool)
        if yt.shape != yp.shape:
            raise ValueError("label vectors differ in length")
        return cls(
            tp=int(np.sum(yt & yp)),
            tn=int(np.sum(~yt & ~yp)),
            fp=int(np.sum(~yt & yp)),
            fn=int(np.sum(yt & ~yp)),
        )


@dataclass(frozen=True)
class MetricReport:
    """One fold's metrics; unavailable entries are None."""

    acc: Optional[float] = None
    sens: Optional[float] = None
    spec: Optional[float] = None
    prec: Optional[float] = None
    auc_balanced: Optional[float] = None
    f1: Optional[float] = None
    roc_auc: Optional[float] = None
    kappa: Optional[float] = None

    FIELDS = ("acc", "sens", "spec", "prec", "auc_balanced", "f1", "roc_auc", "kappa")


def binary_metrics(counts: ConfusionCounts) -> MetricReport:
    """Accuracy, sensitivity, specificity, precision, balanced
    accuracy and F1 from binary confusion counts."""
    if counts.total == 0:
        raise ValueError("empty confusion matrix")
    pos = counts.tp + counts.fn
    neg = counts.tn + counts.fp
    acc = (counts.tp + counts.tn) / counts.total
    sens = counts.tp / pos if pos else None
    spec = counts.tn / neg if neg else None
    prec = (
        counts.tp / (counts.tp + counts.fp) if (counts.tp + counts.fp) else None
    )
    auc_balanced = (sens + spec) / 2.0 if (sens is not None and spec is not None) else None
    f1_denom = 2 * counts.tp + counts.fp + counts.fn
    f1 = (2 * counts.tp) / f1_denom if f1_denom else None
    return MetricReport(
        acc=acc, sens=sens, spec=spec, prec=prec, auc_balanced=auc_balanced, f1=f1
    )


def roc_curve_auc(scores: Sequence):
    """ROC points and trapezoid area from (score, true_label) pairs.

    Returns (points, area) where points is a list of (fpr, tpr,
    threshold) rows starting at (0, 0, inf); equal scores move the
    curve diagonally, so the trapezoid area equals the Mann-Whitney
    pair statistic with ties counted one half.
    """
    pairs = [(float(s), int(bool(l))) for s, l in scores]
    n_pos = sum(l for _, l in pairs)
    n_neg = len(pairs) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both classes present")
    pairs.sort(key=lambda p: -p[0])
    points = [(0.0, 0.0, float("inf"))]
    area = 0.0
    tp = fp = 0
    prev_tpr = prev_fpr = 0.0
    i = 0
    while i < len(pairs):
        threshold = pairs[i][0]
        # Consume the whole tie group at this score.
        while i < len(pairs) and pairs[i][0] == threshold:
            if pairs[i][1]:
                tp += 1
            else:
                fp += 1
            i += 1
        tpr = tp / n_pos
        fpr = fp / n_neg
        area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0
        points.append((fpr, tpr, threshold))
        prev_tpr, prev_fpr = tpr, fpr
    return points, area


def cohen_kappa(confusion) -> float:
    """Chance-corrected agreement from a square confusion matrix
    (rows = truth, columns = prediction)."""
    mat = np.asarray(confusion, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] == 0:
        raise ValueError(f"confusion matrix must be square, got {mat.shape}")
    if (mat < 0).any():
        raise ValueError("confusion counts must be non-negative")
    total = mat.sum()
    if total == 0:
        raise ValueError("empty confusion matrix")
    p_a = np.trace(mat) / total
    p_e = float((mat.sum(axis=1) * mat.sum(axis=0)).sum()) / total**2
    if p_e == 1.0:
        # Only possible when every count sits in one diagonal cell, so
        # observed agreement is perfect.
        return 1.0
    return float((p_a - p_e) / (1.0 - p_e))


@dataclass(frozen=True)
class FoldPlan:
    """Disjoint covering test folds with near-equal class balance."""

    n_folds: int
    folds: tuple  # of int arrays (test indices per fold)

    def train_test(self, fold: int):
        test = self.folds[fold]
        train = np.concatenate(
            [f for i, f in enumerate(self.folds) if i != fold]
        )
        return np.sort(train), test


def stratified_folds(labels, n_folds: int, seed) -> FoldPlan:
    """Round-robin per-class fold assignment after a seeded shuffle.

    Every class must have at least n_folds members; per-class fold
    counts then differ by at most one.
    """
    y = np.asarray(labels)
    if n_folds < 2:
        raise ValueError("need at least 2 folds")
    rng = as_generator(seed)
    assigned = [[] for _ in range(n_folds)]
    classes = sorted(np.unique(y).tolist())
    for cls in classes:
        idx = np.flatnonzero(y == cls)
        if len(idx) < n_folds:
            raise ValueError(
                f"class {cls!r} has {len(idx)} samples, fewer than "
                f"{n_folds} folds"
            )
        rng.shuffle(idx)
        for f in range(n_folds):
            assigned[f].extend(idx[f::n_folds].tolist())
    folds = tuple(np.array(sorted(f), dtype=np.int64) for f in assigned)
    return FoldPlan(n_folds=n_folds, folds=folds)


def class_weights(labels, n_classes: Optional[int] = None) -> np.ndarray:
    """Inverse-frequency weights w_c = N / (C * N_c).

    Under the empirical label distribution the weights average to one,
    so the weighted loss keeps the unweighted loss's scale.
    """
    y = np.asarray(labels)
    c = int(n_classes) if n_classes is not None else int(y.max()) + 1
    counts = np.bincount(y, minlength=c)
    if (counts == 0).any():
        missing = np.flatnonzero(counts == 0).tolist()
        raise ValueError(f"classes {missing} have no samples")
    return len(y) / (c * counts.astype(np.float64))


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    """Dense C x C count matrix, rows = truth."""
    yt = np.asarray(y_true, dtype=np.int64)
    yp = np.asarray(y_pred, dtype=np.int64)
    if yt.shape != yp.shape:
        raise ValueError("label vectors differ in length")
    mat = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(mat, (yt, yp), 1)
    return mat


@dataclass(frozen=True)
class KappaUncertaintyPoint:
    """One dot (or centroid star) of the kappa-uncertainty diagram."""

    classifier_id: str
    fold: int  # -1 marks the centroid
    kappa: float
    uncertainty: float
    is_centroid: bool


def kappa_uncertainty_table(per_classifier: dict) -> list:
    """Fold points plus one centroid per classifier.

    ``per_classifier`` maps classifier_id to a sequence of
    (kappa, uncertainty) fold pairs; the centroid is the coordinate-
    wise mean of the classifier's fold points.
    """
    rows = []
    for classifier_id, folds in per_classifier.items():
        if not folds:
            raise ValueError(f"classifier {classifier_id!r} has no fold points")
        for fold, (kappa, unc) in enumerate(folds):
            rows.append(
                KappaUncertaintyPoint(classifier_id, fold, float(kappa), float(unc), False)
            )
        ks = [k for k, _ in folds]
        us = [u for _, u in folds]
        rows.append(
            KappaUncertaintyPoint(
                classifier_id,
                -1,
                float(np.mean(ks)),
                float(np.mean(us)),
                True,
            )
        )
    return rows


def multiclass_report(confusion: np.ndarray):
    """Per-class one-vs-rest reports plus the macro-average report.

    Returns (macro_report, per_class_reports).  The macro report's
    ``acc`` is the plain multiclass accuracy and ``kappa`` the
    multiclass kappa; the remaining fields are unweighted means of the
    per-class one-vs-rest values (absent values excluded).
    """
    mat = np.asarray(confusion, dtype=np.int64)
    c = mat.shape[0]
    total = mat.sum()
    if total == 0:
        raise ValueError("empty confusion matrix")
    per_class = []
    for k in range(c):
        tp = int(mat[k, k])
        fn = int(mat[k].sum() - tp)
        fp = int(mat[:, k].sum() - tp)
        tn = int(total - tp - fn - fp)
        per_class.append(binary_metrics(ConfusionCounts(tp, tn, fp, fn)))

    def macro(field):
        vals = [getattr(r, field) for r in per_class]
        vals = [v for v in vals if v is not None]
        return float(np.mean(vals)) if vals else None

    macro_report = MetricReport(
        acc=float(np.trace(mat) / total),
        sens=macro("sens"),
        spec=macro("spec"),
        prec=macro("prec"),
        auc_balanced=macro("auc_balanced"),
        f1=macro("f1"),
        kappa=cohen_kappa(mat),
    )
    return macro_report, per_class
