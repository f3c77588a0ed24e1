"""Training losses for the surface network, as plain numpy functions."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidDimensionError

DIV_P_CLAMP = 1e-8
GDICE_EPS = 1e-5
DEFAULT_ALPHA = 10.0
DEFAULT_L1_WEIGHT = 10.0


@dataclass(frozen=True)
class LossReport:
    gdice: float
    div: float
    smooth: float
    l1: float
    total: float
    weight_w: float

    def to_dict(self):
        return asdict(self)


def gradient_weights(image, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """Pixel weights ``1 + alpha * |grad I|`` using central differences (one-sided at borders)."""
    img = np.asarray(image, dtype=float)
    if img.ndim != 2 or img.size == 0:
        raise InvalidDimensionError("image must be a nonempty 2-D array")
    gz = np.gradient(img, axis=0) if img.shape[0] > 1 else np.zeros_like(img)
    gw = np.gradient(img, axis=1) if img.shape[1] > 1 else np.zeros_like(img)
    return 1.0 + alpha * np.hypot(gz, gw)


def weighted_divergence(p, g, W) -> float:
    """``sum W * g * |log(g / p)|``; zero-probability ground truth terms drop out."""
    p = np.asarray(p, dtype=float)
    g = np.asarray(g, dtype=float)
    W = np.broadcast_to(np.asarray(W, dtype=float), g.shape)
    if p.shape != g.shape:
        raise InvalidDimensionError("p and g must have the same shape")
    support = g > 0
    ratio = g[support] / np.maximum(p[support], DIV_P_CLAMP)
    return float(np.sum(W[support] * g[support] * np.abs(np.log(ratio))))


def generalized_dice(pred_regions, gt_regions, eps: float = GDICE_EPS) -> float:
    """Generalized Dice loss over the leading class axis.

    Class weights are ``1 / (sum gt + eps)**2`` so small regions count as
    much as large ones.
    """
    p = np.asarray(pred_regions, dtype=float)
    g = np.asarray(gt_regions, dtype=float)
    if p.shape != g.shape:
        raise InvalidDimensionError(f"shape mismatch {p.shape} vs {g.shape}")
    p = p.reshape(p.shape[0], -1)
    g = g.reshape(g.shape[0], -1)
    w = 1.0 / (g.sum(axis=1) + eps) ** 2
    inter = np.sum(w * np.sum(p * g, axis=1))
    union = np.sum(w * np.sum(p + g, axis=1))
    return float(1.0 - 2.0 * inter / union)


def smooth_loss(pred, gt) -> float:
    """Column-to-column change MSE plus interior layer-thickness MSE, summed over surfaces."""
    pred = np.atleast_2d(np.asarray(pred, dtype=float))
    gt = np.atleast_2d(np.asarray(gt, dtype=float))
    if pred.shape != gt.shape:
        raise InvalidDimensionError("pred and gt must have the same shape")
    if pred.shape[1] < 2:
        raise InvalidDimensionError("smooth loss needs at least two columns")
    change = np.diff(pred, axis=1) - np.diff(gt, axis=1)
    term1 = float(np.sum(np.mean(change**2, axis=1)))
    term2 = 0.0
    if pred.shape[0] > 1:
        thick = np.diff(pred, axis=0) - np.diff(gt, axis=0)
        term2 = float(np.sum(np.mean(thick**2, axis=1)))
    return term1 + term2


def l1_surface_loss(pred, gt) -> float:
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape:
        raise InvalidDimensionError("pred and gt must have the same shape")
    return float(np.mean(np.abs(pred - gt)))


def total_loss(gdice: float, div: float, smooth: float, l1: float,
               w: float = DEFAULT_L1_WEIGHT) -> LossReport:
    total = gdice + div + smooth + w * l1
    return LossReport(gdice=gdice, div=div, smooth=smooth, l1=l1, total=total, weight_w=w)
