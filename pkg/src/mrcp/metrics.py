"""Depth error metrics and mean intersection-over-union."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class MetricError(ValueError):
    pass


@dataclass
class MetricBundle:
    abs_rel: float = float("nan")
    sq_rel: float = float("nan")
    rmse: float = float("nan")
    miou: float = float("nan")


def _valid_mask(target: np.ndarray, max_depth: Optional[float]) -> np.ndarray:
    mask = target > 0
    if max_depth is not None:
        mask &= target < max_depth
    return mask


def depth_metrics(pred, target, max_depth: Optional[float] = None) -> tuple[float, float, float]:
    """(Abs Rel, Sq Rel, RMSE) over pixels with valid ground truth.

    Pixels whose target is non-positive or at/beyond ``max_depth`` (the
    renderer's background value) are excluded.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise MetricError(f"prediction {pred.shape} vs target {target.shape}")
    acc = DepthAccumulator(max_depth)
    acc.update(pred, target)
    return acc.result()


@dataclass
class DepthAccumulator:
    max_depth: Optional[float] = None
    abs_rel: float = 0.0
    sq_rel: float = 0.0
    sq: float = 0.0
    count: int = 0

    def update(self, pred: np.ndarray, target: np.ndarray) -> None:
        mask = _valid_mask(target, self.max_depth)
        p, t = pred[mask], target[mask]
        d = p - t
        self.abs_rel += float(np.sum(np.abs(d) / t))
        self.sq_rel += float(np.sum(d * d / t))
        self.sq += float(np.sum(d * d))
        self.count += int(mask.sum())

    def result(self) -> tuple[float, float, float]:
        if self.count == 0:
            raise MetricError("no valid depth pixels")
        n = self.count
        return self.abs_rel / n, self.sq_rel / n, float(np.sqrt(self.sq / n))


@dataclass
class ConfusionAccumulator:
    num_classes: int
    matrix: np.ndarray = field(init=False)

    def __post_init__(self):
        self.matrix = np.zeros((self.num_classes, self.num_classes), dtype=np.int64)

    def update(self, pred: np.ndarray, target: np.ndarray) -> None:
        k = self.num_classes
        pred = np.asarray(pred, dtype=np.int64).reshape(-1)
        target = np.asarray(target, dtype=np.int64).reshape(-1)
        if pred.size and (min(pred.min(), target.min()) < 0 or max(pred.max(), target.max()) >= k):
            raise MetricError(f"class ids must lie in [0, {k})")
        self.matrix += np.bincount(target * k + pred, minlength=k * k).reshape(k, k)

    def miou(self) -> float:
        tp = np.diag(self.matrix).astype(np.float64)
        fp = self.matrix.sum(axis=0) - tp
        fn = self.matrix.sum(axis=1) - tp
        denom = tp + fp + fn
        present = denom > 0
        if not present.any():
            raise MetricError("no pixels to score")
        return float(np.mean(tp[present] / denom[present]))


def miou(pred, target, num_classes: int) -> float:
    """Mean IoU over classes that occur in the prediction or the target."""
    acc = ConfusionAccumulator(num_classes)
    acc.update(pred, target)
    return acc.miou()
