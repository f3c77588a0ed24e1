"""Surface-distance evaluation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidDimensionError

VIOLATION_TOL = 1e-6


@dataclass(frozen=True)
class EvalReport:
    masd_per_surface: np.ndarray
    masd_overall: float
    violation_count: int

    def to_json(self) -> dict:
        return {
            "masd_per_surface": [float(v) for v in self.masd_per_surface],
            "masd_overall": float(self.masd_overall),
            "violation_count": int(self.violation_count),
        }


def count_violations(positions, tol: float = VIOLATION_TOL) -> int:
    """Number of (surface pair, column) entries where surface i lies below surface i+1."""
    p = np.atleast_2d(np.asarray(positions, dtype=float))
    return int(np.count_nonzero(p[:-1] > p[1:] + tol))


def masd(pred, gt, resolution: float = 1.0) -> EvalReport:
    """Mean absolute surface distance per surface, scaled by ``resolution`` (e.g. um/pixel).

    Violations are counted on ``pred`` only.
    """
    pred = np.atleast_2d(np.asarray(getattr(pred, "positions", pred), dtype=float))
    gt = np.atleast_2d(np.asarray(getattr(gt, "positions", gt), dtype=float))
    if pred.shape != gt.shape:
        raise InvalidDimensionError(f"shape mismatch {pred.shape} vs {gt.shape}")
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    per = resolution * np.mean(np.abs(pred - gt), axis=1)
    return EvalReport(masd_per_surface=per, masd_overall=float(per.mean()),
                      violation_count=count_violations(pred))
