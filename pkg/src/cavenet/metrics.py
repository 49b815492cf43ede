"""Evaluation suite: confusion matrices, per-class and macro metrics,
one-vs-rest AUC, the combined challenge metric, and heatmap export.

Conventions, applied everywhere:

* confusion rows are true classes, columns predicted classes
* 0/0 per-class ratios are reported as 0.0 and flagged undefined; macro
  averages include them so the macro is always defined
* balanced accuracy averages sensitivity over classes with nonzero support
* AUC uses the rank-statistic (Mann-Whitney) form with midrank ties; classes
  lacking positives or negatives are skipped and flagged
* the combined metric is the arithmetic mean of macro AUC and balanced
  accuracy
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .data import io as _io


class MetricsError(ValueError):
    pass


DECISION_DECIMALS = 12


def hard_labels(prob_rows) -> np.ndarray:
    """Argmax with ties resolved to the lowest class index.

    Rows are quantised at 1e-12 first, so mathematical ties arising from
    decimal-valued probabilities resolve by the documented rule instead of
    floating-point dust.
    """
    return np.round(np.asarray(prob_rows, dtype=np.float64),
                    DECISION_DECIMALS).argmax(axis=1)


def confusion(true_labels, pred_labels, num_classes: int) -> np.ndarray:
    """C x C count matrix; rows true, columns predicted."""
    t = np.asarray(true_labels, dtype=np.int64)
    p = np.asarray(pred_labels, dtype=np.int64)
    if t.shape != p.shape or t.ndim != 1:
        raise MetricsError(f"label arrays must be equal-length 1-D, got "
                           f"{t.shape} and {p.shape}")
    if t.size == 0:
        raise MetricsError("no samples to evaluate")
    for name, arr in (("true", t), ("pred", p)):
        if arr.min() < 0 or arr.max() >= num_classes:
            raise MetricsError(f"{name} labels outside [0,{num_classes})")
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (t, p), 1)
    return cm


@dataclass(frozen=True)
class ClassMetrics:
    tp: int
    fn: int
    fp: int
    tn: int
    sensitivity: float
    specificity: float
    precision: float
    f1: float
    undefined: frozenset = field(default_factory=frozenset)


def _ratio(num: int, den: int, tag: str, undefined: set) -> float:
    if den == 0:
        undefined.add(tag)
        return 0.0
    return num / den


def per_class_metrics(cm: np.ndarray) -> list[ClassMetrics]:
    cm = np.asarray(cm, dtype=np.int64)
    total = int(cm.sum())
    out = []
    for j in range(cm.shape[0]):
        tp = int(cm[j, j])
        fn = int(cm[j].sum()) - tp
        fp = int(cm[:, j].sum()) - tp
        tn = total - tp - fn - fp
        undefined: set = set()
        sens = _ratio(tp, tp + fn, "sensitivity", undefined)
        spec = _ratio(tn, tn + fp, "specificity", undefined)
        prec = _ratio(tp, tp + fp, "precision", undefined)
        if prec + sens == 0.0:
            undefined.add("f1")
            f1 = 0.0
        else:
            f1 = 2.0 * prec * sens / (prec + sens)
        out.append(ClassMetrics(tp, fn, fp, tn, sens, spec, prec, f1,
                                frozenset(undefined)))
    return out


def accuracy(cm: np.ndarray) -> float:
    cm = np.asarray(cm, dtype=np.int64)
    total = int(cm.sum())
    if total == 0:
        raise MetricsError("empty confusion matrix")
    return float(np.trace(cm)) / total


def balanced_accuracy(cm: np.ndarray) -> float:
    """Mean per-class sensitivity over classes with nonzero support."""
    cm = np.asarray(cm, dtype=np.int64)
    support = cm.sum(axis=1)
    live = support > 0
    if not live.any():
        raise MetricsError("empty confusion matrix")
    sens = np.diag(cm)[live] / support[live]
    return float(sens.mean())


def one_vs_rest_aucs(prob_rows, true_labels) -> list[float | None]:
    """Per-class one-vs-rest AUC; None marks classes lacking positives or
    negatives."""
    probs = np.asarray(prob_rows, dtype=np.float64)
    labels = np.asarray(true_labels, dtype=np.int64)
    if probs.ndim != 2 or labels.shape[0] != probs.shape[0]:
        raise MetricsError(f"need probs [n,C] and labels [n], got "
                           f"{probs.shape} and {labels.shape}")
    n, c = probs.shape
    out: list[float | None] = []
    for j in range(c):
        pos = labels == j
        n_pos = int(pos.sum())
        n_neg = n - n_pos
        if n_pos == 0 or n_neg == 0:
            out.append(None)
            continue
        scores = probs[:, j]
        ranks = _midranks(scores)
        rank_sum = float(ranks[pos].sum())
        auc = (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
        out.append(auc)
    return out


def _midranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks with ties replaced by their midrank."""
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    n = len(scores)
    while i < n:
        j = i
        while j + 1 < n and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def macro_auc(prob_rows, true_labels) -> float:
    """Unweighted mean of the defined one-vs-rest AUCs."""
    aucs = [a for a in one_vs_rest_aucs(prob_rows, true_labels) if a is not None]
    if not aucs:
        raise MetricsError("no class has both positives and negatives")
    return float(np.mean(aucs))


def combined_metric(auc: float, balanced_acc: float) -> float:
    """Arithmetic mean of macro AUC and balanced accuracy."""
    if not (0.0 <= auc <= 1.0 and 0.0 <= balanced_acc <= 1.0):
        raise MetricsError(f"inputs must lie in [0,1], got {auc}, {balanced_acc}")
    return (auc + balanced_acc) / 2.0


@dataclass(frozen=True)
class MetricsReport:
    """Per-class table plus every aggregate behind the report CSVs."""

    per_class: list[ClassMetrics]
    macro_sensitivity: float
    macro_specificity: float
    macro_precision: float
    macro_f1: float
    accuracy: float
    balanced_accuracy: float
    macro_auc: float | None = None
    combined: float | None = None

    def values_in_range(self) -> bool:
        vals = [self.macro_sensitivity, self.macro_specificity,
                self.macro_precision, self.macro_f1, self.accuracy,
                self.balanced_accuracy]
        vals += [] if self.macro_auc is None else [self.macro_auc, self.combined]
        return all(0.0 <= v <= 1.0 for v in vals)


def report_from_confusion(cm: np.ndarray, prob_rows=None, true_labels=None) -> MetricsReport:
    per_class = per_class_metrics(cm)
    auc = comb = None
    bal = balanced_accuracy(cm)
    if prob_rows is not None:
        auc = macro_auc(prob_rows, true_labels)
        comb = combined_metric(auc, bal)
    return MetricsReport(
        per_class=per_class,
        macro_sensitivity=float(np.mean([m.sensitivity for m in per_class])),
        macro_specificity=float(np.mean([m.specificity for m in per_class])),
        macro_precision=float(np.mean([m.precision for m in per_class])),
        macro_f1=float(np.mean([m.f1 for m in per_class])),
        accuracy=accuracy(cm),
        balanced_accuracy=bal,
        macro_auc=auc,
        combined=comb,
    )


def report_from_predictions(true_labels, prob_rows, num_classes: int) -> MetricsReport:
    probs = np.asarray(prob_rows, dtype=np.float64)
    preds = hard_labels(probs)
    cm = confusion(true_labels, preds, num_classes)
    return report_from_confusion(cm, probs, true_labels)


# ---------------------------------------------------------------------------
# export


REPORT_HEADER = ["model", "avg_acc", "avg_specificity", "avg_sensitivity",
                 "avg_f1", "avg_precision"]

COMBINED_HEADER = ["model", "avg_auc", "balanced_accuracy", "combined_metric"]


def write_report_csv(path: str, rows: list[tuple[str, MetricsReport]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_HEADER)
        for name, rep in rows:
            writer.writerow([name, repr(rep.accuracy), repr(rep.macro_specificity),
                             repr(rep.macro_sensitivity), repr(rep.macro_f1),
                             repr(rep.macro_precision)])


def write_combined_csv(path: str, rows: list[tuple[str, MetricsReport]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COMBINED_HEADER)
        for name, rep in rows:
            if rep.macro_auc is None:
                continue
            writer.writerow([name, repr(rep.macro_auc), repr(rep.balanced_accuracy),
                             repr(rep.combined)])


def read_report_csv(path: str) -> list[dict]:
    """Rows of report.csv (or report_<name>.csv) as dicts keyed by header."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != REPORT_HEADER:
            raise MetricsError(f"{path}: bad report header {header}")
        return [{"model": row[0], **{k: float(v) for k, v in
                                     zip(header[1:], row[1:])}}
                for row in reader]


def read_combined_csv(path: str) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != COMBINED_HEADER:
            raise MetricsError(f"{path}: bad combined-report header {header}")
        return [{"model": row[0], **{k: float(v) for k, v in
                                     zip(header[1:], row[1:])}}
                for row in reader]


def write_confusion_csv(path: str, cm: np.ndarray) -> None:
    cm = np.asarray(cm, dtype=np.int64)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"pred_{j}" for j in range(cm.shape[1])])
        for row in cm:
            writer.writerow([int(v) for v in row])


def read_confusion_csv(path: str) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[int(v) for v in row] for row in reader]
    cm = np.array(rows, dtype=np.int64)
    if cm.ndim != 2 or cm.shape[1] != len(header):
        raise MetricsError(f"{path}: malformed confusion CSV")
    return cm


HEATMAP_CELL = 24  # pixels per confusion cell


def export_heatmap(cm: np.ndarray, image_path: str, csv_path: str | None = None) -> None:
    """Row-normalised confusion rendered as a grayscale PPM grid, plus the
    raw counts as CSV.  Deterministic: identical cm gives identical bytes."""
    cm = np.asarray(cm, dtype=np.int64)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise MetricsError(f"confusion matrix must be square, got {cm.shape}")
    sums = cm.sum(axis=1, keepdims=True).astype(np.float64)
    norm = np.divide(cm, np.maximum(sums, 1), dtype=np.float64)
    cells = np.kron(norm, np.ones((HEATMAP_CELL, HEATMAP_CELL)))
    _io.write_ppm(image_path, np.repeat(cells[None, :, :], 3, axis=0))
    if csv_path:
        write_confusion_csv(csv_path, cm)
