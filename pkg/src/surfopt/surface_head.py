"""Surface-cost parameterization from per-column probability maps.

For every surface ``i`` and image column ``q`` the head combines two
location estimates:

* ``xi``: the soft-argmax of the surface's column distribution, and
* ``gamma``: a region-count estimate from the argmax region labels,
  down-weighted by a confidence index ``c`` that drops as labels become
  disordered along the column,

into the mean ``mu = (c * gamma + (kappa - c) * xi) / kappa`` and the variance
``sigma_sq = sum_z p(z) (z - mu)**2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidDimensionError, InvalidDistributionError, InvalidLabelError

SIGMA_FLOOR = 0.01
NORMALIZATION_TOL = 1e-6


@dataclass(frozen=True)
class FusionParams:
    kappa: float = 2.0

    def __post_init__(self):
        if not self.kappa >= 2:
            raise ValueError(f"kappa must be >= 2, got {self.kappa}")


@dataclass(frozen=True)
class ProbabilityField:
    """Surface distributions ``(N, Z, W)`` and region labels ``(Z, W)`` in ``[0, N]``."""

    surface_probs: np.ndarray
    region_labels: np.ndarray

    def __post_init__(self):
        probs = np.array(self.surface_probs, dtype=float)
        labels = np.array(self.region_labels)
        if probs.ndim != 3:
            raise InvalidDimensionError("surface_probs must have shape (N, Z, W)")
        n, z, w = probs.shape
        if labels.shape != (z, w):
            raise InvalidDimensionError(
                f"region_labels has shape {labels.shape}, expected {(z, w)}")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise InvalidDistributionError("probabilities must be finite and nonnegative")
        sums = probs.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > NORMALIZATION_TOL):
            raise InvalidDistributionError("every surface column must sum to 1")
        if not np.all(labels == np.round(labels)):
            raise InvalidLabelError("region labels must be integers")
        labels = labels.astype(int)
        if labels.size and (labels.min() < 0 or labels.max() > n):
            raise InvalidLabelError(f"region labels must lie in [0, {n}]")
        probs.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "surface_probs", probs)
        object.__setattr__(self, "region_labels", labels)

    @property
    def shape(self):
        return self.surface_probs.shape

    def column(self, q: int):
        return self.surface_probs[:, :, q], self.region_labels[:, q]


def column_softmax(logits) -> np.ndarray:
    x = np.asarray(logits, dtype=float)
    e = np.exp(x - x.max())
    return e / e.sum()


def _check_distribution(p: np.ndarray) -> None:
    if abs(p.sum() - 1.0) > NORMALIZATION_TOL:
        raise InvalidDistributionError(f"distribution sums to {p.sum():.8g}, not 1")


def expected_location(p) -> float:
    """Soft-argmax ``sum_z z * p(z)``."""
    p = np.asarray(p, dtype=float)
    _check_distribution(p)
    return float(np.arange(p.shape[0]) @ p)


def region_envelope(labels_column, n: int):
    """Region-based surface estimates ``gamma`` (length n) and confidence ``c``.

    ``gamma[i]`` is the number of voxels labelled ``<= i`` minus one half, the
    boundary position for a consecutive labelling. ``c`` decreases by
    ``1 / (Z - 1)`` for each adjacent voxel pair whose labels descend.
    """
    labels = np.asarray(labels_column)
    if n < 1:
        raise InvalidDimensionError("need at least one surface")
    if labels.size and (labels.min() < 0 or labels.max() > n):
        raise InvalidLabelError(f"region labels must lie in [0, {n}]")
    counts = np.bincount(labels.astype(int), minlength=n + 1)
    gamma = np.cumsum(counts)[:n] - 0.5
    z = labels.shape[0]
    disorder = int(np.count_nonzero(labels[:-1] > labels[1:]))
    c = 1.0 if z < 2 else float(np.clip(1.0 - disorder / (z - 1), 0.0, 1.0))
    return gamma.astype(float), c


def fuse_mu(gamma_i, xi_i, c, kappa) -> float:
    return (c * gamma_i + (kappa - c) * xi_i) / kappa


def sigma_sq_from_dist(p, mu, floor: float = SIGMA_FLOOR) -> float:
    p = np.asarray(p, dtype=float)
    z = np.arange(p.shape[0])
    return max(float(p @ (z - mu) ** 2), floor)


def gaussian_gt(surface_z: float, sigma: float, Z: int) -> np.ndarray:
    """Discrete Gaussian centred at ``surface_z`` over ``z = 0..Z-1``, summing to 1."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if Z < 1:
        raise InvalidDimensionError("Z must be at least 1")
    z = np.arange(Z)
    logits = -((z - surface_z) ** 2) / (2.0 * sigma**2)
    return column_softmax(logits)


@dataclass(frozen=True)
class ColumnParameters:
    mu: np.ndarray
    sigma_sq: np.ndarray
    xi: np.ndarray
    gamma: np.ndarray
    confidence: float
    clamped: np.ndarray


def parameterize_column(probs, labels, params: FusionParams = FusionParams()) -> ColumnParameters:
    """``(mu, sigma_sq)`` for one column from surface distributions ``(N, Z)`` and labels ``(Z,)``.

    A fused mean outside ``[0, Z-1]`` is clamped and flagged in ``clamped``.
    """
    probs = np.asarray(probs, dtype=float)
    n, z = probs.shape
    xi = np.array([expected_location(p) for p in probs])
    gamma, c = region_envelope(labels, n)
    mu = fuse_mu(gamma, xi, c, params.kappa)
    clamped = (mu < 0) | (mu > z - 1)
    mu = np.clip(mu, 0.0, z - 1)
    sigma_sq = np.array([sigma_sq_from_dist(p, m) for p, m in zip(probs, mu)])
    return ColumnParameters(mu=mu, sigma_sq=sigma_sq, xi=xi, gamma=gamma,
                            confidence=c, clamped=clamped)


def parameterize_field(field: ProbabilityField, params: FusionParams = FusionParams()):
    """Vectorized ``parameterize_column`` over all columns.

    Returns ``(mu, sigma_sq, confidence, clamped)`` with ``mu``/``sigma_sq``
    of shape ``(N, W)``.
    """
    probs = field.surface_probs
    labels = field.region_labels
    n, z, w = probs.shape
    zz = np.arange(z, dtype=float)
    xi = np.einsum("nzw,z->nw", probs, zz)
    # cumulative label counts: gamma[i, q] = #{z : label <= i} - 0.5
    gamma = np.stack([(labels <= i).sum(axis=0) for i in range(n)]).astype(float) - 0.5
    if z >= 2:
        disorder = np.count_nonzero(labels[:-1] > labels[1:], axis=0)
        c = np.clip(1.0 - disorder / (z - 1), 0.0, 1.0)
    else:
        c = np.ones(w)
    mu = fuse_mu(gamma, xi, c[None, :], params.kappa)
    clamped = (mu < 0) | (mu > z - 1)
    mu = np.clip(mu, 0.0, z - 1)
    var = np.einsum("nzw,nzw->nw", probs, (zz[None, :, None] - mu[:, None, :]) ** 2)
    sigma_sq = np.maximum(var, SIGMA_FLOOR)
    return mu, sigma_sq, c, clamped
