"""Metrics and k-fold evaluation: top-k accuracy, confusion, fold aggregation.

Every fold trains on the other four, selects its snapshot on its own
validation fold, and is tested on the one shared holdout slice, so the five
accuracies are comparable. Reported spread is the sample (n-1) standard
deviation over those five numbers, recorded as such in the report metadata.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus.manifest import FOLD_HOLDOUT, FOLD_UNASSIGNED, N_FOLDS, DatasetManifest
from .errors import ValidationError
from .fusion.features import FeatureTable
from .fusion.train import Prediction, TrainConfig, predict_batch, train


@dataclass(frozen=True)
class ConfusionMatrix:
    classes: tuple
    counts: np.ndarray  # rows = truth, cols = prediction

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        counts = np.asarray(self.counts, dtype=np.int64)
        n = len(self.classes)
        if counts.shape != (n, n):
            raise ValidationError(f"confusion counts must be {n}x{n}, got {counts.shape}")
        if (counts < 0).any():
            raise ValidationError("confusion counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    def row_support(self, i: int) -> int:
        return int(self.counts[i].sum())


@dataclass(frozen=True)
class EvalReport:
    top1_mean: float
    top1_std: float
    top3_mean: float
    top3_std: float
    per_fold: tuple  # (top1, top3) per fold, percentages
    confusion: ConfusionMatrix
    per_class_recall: tuple
    metadata: dict

    def __post_init__(self):
        for top1, top3 in self.per_fold:
            if not (0.0 <= top1 <= 100.0 and 0.0 <= top3 <= 100.0):
                raise ValidationError("fold accuracies must be percentages in [0, 100]")
            if top1 > top3 + 1e-9:
                raise ValidationError("top-1 accuracy cannot exceed top-3")


def _ranked_classes(prediction: Prediction):
    probs = prediction.probabilities
    return sorted(range(len(probs)), key=lambda j: (-probs[j], j))


def topk_accuracy(predictions, labels, k: int) -> float:
    """Percentage whose true label ranks in the top k (ties -> lower index)."""
    predictions = list(predictions)
    labels = list(labels)
    if len(predictions) != len(labels):
        raise ValidationError("predictions and labels must be aligned")
    if not predictions:
        raise ValidationError("cannot score an empty prediction list")
    if k < 1:
        raise ValidationError("k must be >= 1")
    n_classes = len(predictions[0].probabilities)
    if k > n_classes:
        raise ValidationError(f"k={k} exceeds {n_classes} classes")
    hits = 0
    for pred, truth in zip(predictions, labels):
        if truth in _ranked_classes(pred)[:k]:
            hits += 1
    return 100.0 * hits / len(predictions)


def confusion_matrix(predictions, labels, classes) -> ConfusionMatrix:
    classes = tuple(classes)
    n = len(classes)
    counts = np.zeros((n, n), dtype=np.int64)
    for pred, truth in zip(predictions, labels):
        if not 0 <= truth < n:
            raise ValidationError(f"label {truth} out of range for {n} classes")
        if not 0 <= pred.top_label < n:
            raise ValidationError(f"predicted label {pred.top_label} out of range for {n} classes")
        counts[truth, pred.top_label] += 1
    return ConfusionMatrix(classes=classes, counts=counts)


def misclassification_rate(cm: ConfusionMatrix, i: int, j: int) -> float:
    """Fraction of class-i examples predicted as class j."""
    n = len(cm.classes)
    if not (0 <= i < n and 0 <= j < n):
        raise ValidationError(f"class indices ({i}, {j}) out of range for {n} classes")
    support = cm.row_support(i)
    if support == 0:
        raise ValidationError(f"rate undefined: class {cm.classes[i]!r} has zero support")
    return float(cm.counts[i, j]) / support


def mean_and_sample_std(values) -> tuple:
    values = [float(v) for v in values]
    if not values:
        raise ValidationError("cannot aggregate an empty list")
    mean = sum(values) / len(values)
    if len(values) == 1:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (len(values) - 1)
    return mean, math.sqrt(var)


def cross_validate(
    manifest: DatasetManifest,
    img: FeatureTable,
    txt: FeatureTable,
    cfg: TrainConfig,
) -> EvalReport:
    """Train five fold models and test each on the shared holdout slice."""
    holdout = [ex for ex in manifest.examples if ex.fold == FOLD_HOLDOUT]
    if any(ex.fold == FOLD_UNASSIGNED for ex in manifest.examples):
        raise ValidationError("manifest has unassigned folds; run assign_splits first")
    if not holdout:
        raise ValidationError("manifest has no holdout examples")
    for k in range(N_FOLDS):
        if not any(ex.fold == k for ex in manifest.examples):
            raise ValidationError(f"manifest is missing fold {k}")

    holdout_ids = [ex.example_id for ex in holdout]
    holdout_labels = [ex.label for ex in holdout]
    n = len(manifest.classes)
    per_fold = []
    summed = np.zeros((n, n), dtype=np.int64)
    for k in range(N_FOLDS):
        params, _ = train(manifest, img, txt, k, cfg)
        predictions = predict_batch(params, holdout_ids, img, txt)
        top1 = topk_accuracy(predictions, holdout_labels, 1)
        top3 = topk_accuracy(predictions, holdout_labels, min(3, n))
        per_fold.append((top1, top3))
        summed += confusion_matrix(predictions, holdout_labels, manifest.classes).counts

    top1_mean, top1_std = mean_and_sample_std([f[0] for f in per_fold])
    top3_mean, top3_std = mean_and_sample_std([f[1] for f in per_fold])
    confusion = ConfusionMatrix(classes=manifest.classes, counts=summed)
    supports = summed.sum(axis=1)
    recall = tuple(
        float(summed[i, i]) / supports[i] if supports[i] else 0.0 for i in range(n)
    )
    return EvalReport(
        top1_mean=top1_mean,
        top1_std=top1_std,
        top3_mean=top3_mean,
        top3_std=top3_std,
        per_fold=tuple(per_fold),
        confusion=confusion,
        per_class_recall=recall,
        metadata={
            "n_folds": N_FOLDS,
            "std_estimator": "sample (n-1)",
            "holdout_size": len(holdout),
            "seed": cfg.seed,
        },
    )


def write_eval_report(report: EvalReport, out_dir) -> list:
    """Emit report.json and confusion.csv; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "report.json"
    payload = {
        "top1_mean": report.top1_mean,
        "top1_std": report.top1_std,
        "top3_mean": report.top3_mean,
        "top3_std": report.top3_std,
        "per_fold": [{"top1": t1, "top3": t3} for t1, t3 in report.per_fold],
        "per_class_recall": {
            name: report.per_class_recall[i] for i, name in enumerate(report.confusion.classes)
        },
        "metadata": report.metadata,
    }
    report_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    confusion_path = out_dir / "confusion.csv"
    with confusion_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["truth\\prediction", *report.confusion.classes])
        for i, name in enumerate(report.confusion.classes):
            writer.writerow([name, *report.confusion.counts[i].tolist()])
    return [report_path, confusion_path]
