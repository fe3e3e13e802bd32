"""SEA scoring: segmentation-driven evaluation of fused images.

A fusion method is scored by the mean IoU that fixed segmentation
predictors reach on its fused images. The dataset score pools one
confusion matrix over all images per predictor, then averages the
per-predictor mIoU values; per-image scores exist separately for the
image-level difference analysis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .imaging import IGNORE_LABEL, SegMask

UNDEFINED_IOU = math.nan


@dataclass(frozen=True)
class ClassSet:
    """Ordered class vocabulary; label id = index, 255 reserved as ignore."""

    names: tuple

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        if not names:
            raise ContractError("ClassSet needs at least one class name")
        if len(names) > 255:
            raise ContractError(f"ClassSet supports at most 255 classes, got {len(names)}")
        if len(set(names)) != len(names):
            raise ContractError("ClassSet names must be unique")
        object.__setattr__(self, "names", names)

    def __len__(self) -> int:
        return len(self.names)


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Ground truth (rows) vs prediction (columns) pixel counts.

    Column k (one past the last class) is the miss bucket for predictions
    labeled 255: they count as false negatives for the true class and are
    never credited to any class column.
    """

    counts: np.ndarray  # (k, k+1) int64
    class_count: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        k = self.class_count
        if k < 1 or counts.shape != (k, k + 1):
            raise ContractError(
                f"confusion matrix must be ({k}, {k + 1}), got {counts.shape}")
        if (counts < 0).any():
            raise ContractError("confusion matrix counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def empty(cls, class_count: int) -> "ConfusionMatrix":
        return cls(np.zeros((class_count, class_count + 1), dtype=np.int64), class_count)

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.class_count != self.class_count:
            raise ContractError("cannot merge confusion matrices of different class counts")
        return ConfusionMatrix(self.counts + other.counts, self.class_count)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class SeaScore:
    """Per-class IoU, the pooled mIoU, and (when aggregated) per-predictor
    scores with their arithmetic mean. Undefined classes carry NaN."""

    per_class_iou: tuple
    miou: float
    per_predictor: dict = field(default_factory=dict)
    mean: float | None = None


def _check_labels(mask: SegMask, class_count: int, what: str) -> np.ndarray:
    labels = mask.labels
    bad = (labels >= class_count) & (labels != IGNORE_LABEL)
    if bad.any():
        index = int(np.argmax(bad.ravel()))
        raise ContractError(
            f"{what} label {int(labels.ravel()[index])} at pixel index {index} "
            f"outside class range 0..{class_count - 1}")
    return labels


def accumulate(cm: ConfusionMatrix, pred: SegMask, gt: SegMask) -> ConfusionMatrix:
    """Add one image's pixels: gt 255 is skipped, pred 255 goes to the miss
    bucket. Returns a new matrix; accumulation order never matters."""
    if pred.shape != gt.shape:
        raise ContractError(
            f"prediction {pred.shape} and ground truth {gt.shape} dimensions differ")
    k = cm.class_count
    gt_labels = _check_labels(gt, k, "ground-truth")
    pred_labels = _check_labels(pred, k, "prediction")
    keep = gt_labels != IGNORE_LABEL
    g = gt_labels[keep].astype(np.int64)
    p = pred_labels[keep].astype(np.int64)
    p = np.where(p == IGNORE_LABEL, k, p)
    delta = np.bincount(g * (k + 1) + p, minlength=k * (k + 1)).reshape(k, k + 1)
    return ConfusionMatrix(cm.counts + delta, k)


def compute_score(cm: ConfusionMatrix) -> SeaScore:
    """Per-class IoU = TP/(TP+FP+FN); classes absent from gt and pred are
    undefined (NaN) and excluded from the mean."""
    counts = cm.counts
    k = cm.class_count
    tp = np.diag(counts[:, :k]).astype(np.float64)
    fn = counts.sum(axis=1).astype(np.float64) - tp
    fp = counts[:, :k].sum(axis=0).astype(np.float64) - tp
    denom = tp + fp + fn
    defined = denom > 0
    if not defined.any():
        raise ContractError("no class has any observed pixel; mIoU undefined")
    iou = np.where(defined, tp / np.where(defined, denom, 1.0), UNDEFINED_IOU)
    miou = float(iou[defined].mean())
    return SeaScore(tuple(float(v) for v in iou), miou)


def per_image_scores(pairs, class_count: int) -> list[float]:
    """Independent mIoU per (pred, gt) pair, fresh matrix each image."""
    scores = []
    for pred, gt in pairs:
        cm = accumulate(ConfusionMatrix.empty(class_count), pred, gt)
        scores.append(compute_score(cm).miou)
    return scores


def aggregate_predictors(scores: dict) -> float:
    """Arithmetic mean of per-predictor mIoU values."""
    if not scores:
        raise ContractError("aggregate_predictors needs at least one predictor score")
    return float(sum(scores.values()) / len(scores))
