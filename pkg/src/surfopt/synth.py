"""Synthetic multi-surface fixtures with known ground truth."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidDimensionError, InvalidSpecError
from .surface_head import ProbabilityField, gaussian_gt

MIN_GT_GAP = 1.0


@dataclass(frozen=True)
class SynthSpec:
    N: int = 3
    Z: int = 64
    W: int = 32
    amplitude: float = 1.5
    wavelength: Optional[float] = None
    offsets: Optional[Sequence[float]] = None
    noise_sigma: float = 0.5
    gt_sigma: float = 8.0
    seed: int = 42

    def __post_init__(self):
        if self.N < 1 or self.Z < 2 or self.W < 1:
            raise InvalidDimensionError("need N >= 1, Z >= 2 and W >= 1")
        if self.noise_sigma < 0 or not self.gt_sigma > 0:
            raise InvalidSpecError("noise_sigma must be >= 0 and gt_sigma > 0")
        if self.offsets is not None and len(self.offsets) != self.N:
            raise InvalidDimensionError("offsets must have one entry per surface")


def _default_offsets(spec: SynthSpec) -> np.ndarray:
    # keep the surfaces where a gt_sigma-wide Gaussian is barely truncated
    lo = 3.0 * spec.gt_sigma + spec.amplitude
    hi = spec.Z - 1 - 3.0 * spec.gt_sigma - spec.amplitude
    if hi - lo < (spec.N - 1) * (2 * spec.amplitude + 2 * MIN_GT_GAP):
        lo = 0.25 * (spec.Z - 1) + spec.amplitude
        hi = 0.75 * (spec.Z - 1) - spec.amplitude
    if spec.N == 1:
        return np.array([(lo + hi) / 2.0])
    return np.linspace(lo, hi, spec.N)


def ground_truth_surfaces(spec: SynthSpec) -> np.ndarray:
    """Smooth ordered sinusoids, shape ``(N, W)``."""
    rng = np.random.default_rng(spec.seed)
    offsets = (np.asarray(spec.offsets, dtype=float) if spec.offsets is not None
               else _default_offsets(spec))
    wavelength = spec.wavelength if spec.wavelength is not None else float(spec.W)
    phase = rng.uniform(0, 2 * np.pi)
    scale = rng.uniform(0.5, 1.0, spec.N)
    q = np.arange(spec.W)
    wave = np.sin(2 * np.pi * q / wavelength + phase)
    gt = offsets[:, None] + spec.amplitude * scale[:, None] * wave[None, :]
    if spec.N > 1 and np.min(np.diff(gt, axis=0)) < MIN_GT_GAP:
        raise InvalidSpecError("synthetic surfaces closer than the minimum gap; "
                               "reduce amplitude or widen offsets")
    if gt.min() < 0 or gt.max() > spec.Z - 1:
        raise InvalidSpecError("synthetic surfaces leave the image")
    return gt


def region_labels_from_positions(positions, Z: int) -> np.ndarray:
    """Label voxel ``z`` with the number of surfaces lying strictly above it."""
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    z = np.arange(Z)[:, None, None]
    return np.sum(positions[None, :, :] < z, axis=1)


def synth_generate(spec: SynthSpec):
    """Return ``(ProbabilityField, gt)``; ``gt`` is the clean ``(N, W)`` surface array.

    The emitted distributions and labels are built around noisy positions
    (``gt`` plus Gaussian noise of width ``noise_sigma``).
    """
    gt = ground_truth_surfaces(spec)
    rng = np.random.default_rng([spec.seed, 1])
    noisy = gt + rng.normal(0.0, spec.noise_sigma, gt.shape) if spec.noise_sigma > 0 else gt
    probs = np.empty((spec.N, spec.Z, spec.W))
    for i in range(spec.N):
        for q in range(spec.W):
            probs[i, :, q] = gaussian_gt(noisy[i, q], spec.gt_sigma, spec.Z)
    labels = region_labels_from_positions(noisy, spec.Z)
    return ProbabilityField(probs, labels), gt
