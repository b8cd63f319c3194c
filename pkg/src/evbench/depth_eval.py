"""Monocular depth evaluation with per-frame median scaling.

A pixel is valid when both maps are finite and positive; zero depth is the
invalid sentinel (same convention as the stored depth tensors).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DELTA1_RATIO = 1.25


class EmptyFrameError(ValueError):
    """Frame with no valid pixels."""


@dataclass
class DepthMetrics:
    abs_rel: float
    delta1: float


def valid_mask(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
    return (gt > 0) & (pred > 0) & np.isfinite(gt) & np.isfinite(pred)


def median_scale_factor(pred: np.ndarray, gt: np.ndarray) -> float:
    """median(gt_valid) / median(pred_valid)."""
    mask = valid_mask(pred, gt)
    if not mask.any():
        raise EmptyFrameError("no valid pixels")
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    return float(np.median(gt[mask]) / np.median(pred[mask]))


def median_scale(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """Prediction multiplied by the per-frame median scale factor."""
    return np.asarray(pred, dtype=np.float64) * median_scale_factor(pred, gt)


def depth_metrics(pred: np.ndarray, gt: np.ndarray, apply_scaling: bool = False) -> DepthMetrics:
    """AbsRel and delta1 over valid pixels.

    AbsRel = mean(|pred - gt| / gt); delta1 = fraction of pixels with
    max(pred/gt, gt/pred) < 1.25 (strict). Median scaling is assumed done
    already unless apply_scaling is set.
    """
    if apply_scaling:
        pred = median_scale(pred, gt)
    mask = valid_mask(pred, gt)
    if not mask.any():
        raise EmptyFrameError("no valid pixels")
    p = np.asarray(pred, dtype=np.float64)[mask]
    g = np.asarray(gt, dtype=np.float64)[mask]
    abs_rel = float(np.mean(np.abs(p - g) / g))
    ratio = np.maximum(p / g, g / p)
    delta1 = float(np.count_nonzero(ratio < DELTA1_RATIO)) / ratio.size
    return DepthMetrics(abs_rel=abs_rel, delta1=delta1)
