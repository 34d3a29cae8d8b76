"""Task losses for depth estimation and semantic segmentation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .autodiff import ContractViolation, DimensionError, Tensor
from .autodiff import functional as F
from .autodiff.tensor import as_tensor


@dataclass
class LossConfig:
    """Weights of the depth objective.

    ``alpha_smooth`` weights the edge-aware smoothness term and ``beta`` is
    the smooth-L1 transition point (meters).
    """

    alpha_smooth: float = 1e-3
    beta: float = 1.0

    def __post_init__(self):
        if self.alpha_smooth < 0:
            raise ValueError("alpha_smooth must be non-negative")
        if not self.beta > 0:
            raise ValueError("beta must be positive")


def smooth_l1(pred, target, beta: float = 1.0) -> Tensor:
    """Pixel mean of 0.5 d^2 / beta for |d| < beta, else |d| - 0.5 beta."""
    pred = as_tensor(pred)
    target = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(f"smooth_l1: prediction {pred.shape} vs target {target.shape}")
    if not beta > 0:
        raise ValueError("beta must be positive")
    d = pred - target
    quad = (d * d) * (0.5 / beta)
    lin = F.absolute(d) - 0.5 * beta
    return F.mean(F.where(np.abs(d.data) < beta, quad, lin))


def edge_aware_smoothness(pred, image) -> Tensor:
    """Depth-gradient penalty damped where the image has strong gradients.

    ``pred`` is (..., H, W) and ``image`` (..., 3, H, W). Forward
    differences; image gradient magnitudes are averaged over channels.
    The x and y terms are each averaged over their own pixel pairs.
    """
    pred = as_tensor(pred)
    img = np.asarray(image.data if isinstance(image, Tensor) else image, dtype=np.float64)
    if img.shape[-2:] != pred.shape[-2:] or img.shape[:-3] != pred.shape[:-2]:
        raise DimensionError(f"edge_aware_smoothness: depth {pred.shape} vs image {img.shape}")
    wx = np.exp(-np.abs(np.diff(img, axis=-1)).mean(axis=-3))
    wy = np.exp(-np.abs(np.diff(img, axis=-2)).mean(axis=-3))
    dx = pred[..., :, 1:] - pred[..., :, :-1]
    dy = pred[..., 1:, :] - pred[..., :-1, :]
    return F.mean(F.absolute(dx) * wx) + F.mean(F.absolute(dy) * wy)


def depth_loss(image, pred, target, cfg: LossConfig = LossConfig()) -> Tensor:
    loss = smooth_l1(pred, target, cfg.beta)
    if cfg.alpha_smooth:
        loss = loss + cfg.alpha_smooth * edge_aware_smoothness(pred, image)
    return loss


def seg_loss(logits, target) -> Tensor:
    """Mean cross entropy; ``logits`` (..., K, H, W), ``target`` (..., H, W) ints."""
    logits = as_tensor(logits)
    target = np.asarray(target)
    k = logits.shape[-3]
    if target.shape != logits.shape[:-3] + logits.shape[-2:]:
        raise DimensionError(f"seg_loss: logits {logits.shape} vs target {target.shape}")
    if target.size and (target.min() < 0 or target.max() >= k):
        raise ValueError(f"target classes must lie in [0, {k})")
    onehot = np.moveaxis(np.eye(k)[target.astype(np.int64)], -1, -3)
    logp = F.log_softmax(logits, axis=-3)
    picked = F.sum(logp * onehot, axis=-3)
    return -F.mean(picked)


def total_loss(per_node: Sequence) -> Tensor:
    """Mean of the robots' individual objectives."""
    if len(per_node) == 0:
        raise ContractViolation("total_loss needs at least one robot")
    return F.stack([F.reshape(as_tensor(v), ()) for v in per_node], axis=0).mean()
