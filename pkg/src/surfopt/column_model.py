"""Per-column QP data model.

A column carries N surface heights ``s`` that must stay ordered along the
z-axis (index ``i + 1`` lies below index ``i``, so ``s[i] <= s[i + 1]``).
The objective is the Gaussian on-surface cost ``sum (s - mu)**2 / (2 sigma_sq)``.

Two constraint forms are supported:

* adjacency only: ``A @ s <= 0`` with ``A`` the (N-1) x N bidiagonal
  difference operator, ``(A @ s)[i] = s[i] - s[i + 1]``;
* bounded gaps: ``delta[i] <= s[i + 1] - s[i] <= Delta[i]``, written as
  ``B @ s <= b`` with ``B = [A; -A]`` and ``b = [-delta; Delta]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from .errors import InfeasibleSpecError, InvalidDimensionError, InvalidParameterError


@dataclass(frozen=True)
class ConstraintSpec:
    """Gap constraints between adjacent surfaces.

    ``delta is None`` selects the adjacency-only variant. Otherwise both
    ``delta`` (minimum gap, finite, >= 0) and ``Delta`` (maximum gap, may be
    ``inf``) have length N-1.
    """

    delta: Optional[np.ndarray] = None
    Delta: Optional[np.ndarray] = None

    def __post_init__(self):
        if (self.delta is None) != (self.Delta is None):
            # one-sided specs get the neutral bound for the missing side
            if self.delta is None:
                Delta = _as_vector(self.Delta)
                object.__setattr__(self, "delta", np.zeros_like(Delta))
                object.__setattr__(self, "Delta", Delta)
            else:
                delta = _as_vector(self.delta)
                object.__setattr__(self, "delta", delta)
                object.__setattr__(self, "Delta", np.full_like(delta, np.inf))
        elif self.delta is not None:
            object.__setattr__(self, "delta", _as_vector(self.delta))
            object.__setattr__(self, "Delta", _as_vector(self.Delta))
        if self.delta is not None:
            if self.delta.shape != self.Delta.shape:
                raise InvalidDimensionError("delta and Delta must have the same length")
            if np.any(~np.isfinite(self.delta)) or np.any(self.delta < 0):
                raise InfeasibleSpecError("delta must be finite and nonnegative")
            if np.any(np.isnan(self.Delta)):
                raise InfeasibleSpecError("Delta must not contain NaN")
            if np.any(self.delta > self.Delta):
                raise InfeasibleSpecError("delta exceeds Delta for some gap")
            self.delta.setflags(write=False)
            self.Delta.setflags(write=False)

    @property
    def bounded(self) -> bool:
        return self.delta is not None

    @classmethod
    def adjacency(cls) -> "ConstraintSpec":
        return cls()

    @classmethod
    def gaps(cls, delta, Delta=None) -> "ConstraintSpec":
        delta = _as_vector(delta)
        if Delta is None:
            Delta = np.full_like(delta, np.inf)
        return cls(delta=delta, Delta=Delta)

    def check_size(self, n: int) -> None:
        if self.bounded and self.delta.shape[0] != max(n - 1, 0):
            raise InvalidDimensionError(
                f"gap bounds have length {self.delta.shape[0]}, expected {n - 1}"
            )


@dataclass(frozen=True)
class SolverParams:
    """Interior point controls.

    ``beta1`` shrinks the step during backtracking, ``beta2`` sets the
    sufficient-decrease slope of the residual test and ``beta3`` the growth
    factor of the barrier parameter ``t``.

    The loop stops once the residual norm drops below ``epsilon``. A small
    residual only certifies a point on the central path for the current
    ``t``; setting ``gap_tolerance`` additionally requires the duality gap
    ``-(G s - h)^T lam`` to fall below it, which bounds the distance to the
    exact QP optimum.
    """

    beta1: float = 0.5
    beta2: float = 0.055
    beta3: float = 10.0
    epsilon: float = 0.01
    max_outer: int = 50
    lambda0: float = 1.0
    feasibility_margin: float = 1e-3
    gap_tolerance: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.beta1 < 1:
            raise InvalidParameterError("beta1 must lie in (0, 1)")
        if not 0 < self.beta2 < 1:
            raise InvalidParameterError("beta2 must lie in (0, 1)")
        if not self.beta3 > 1:
            raise InvalidParameterError("beta3 must exceed 1")
        if not self.epsilon > 0:
            raise InvalidParameterError("epsilon must be positive")
        if int(self.max_outer) != self.max_outer or self.max_outer < 1:
            raise InvalidParameterError("max_outer must be a positive integer")
        if not self.lambda0 > 0:
            raise InvalidParameterError("lambda0 must be positive")
        if not self.feasibility_margin >= 0:
            raise InvalidParameterError("feasibility_margin must be nonnegative")
        if self.gap_tolerance is not None and not self.gap_tolerance > 0:
            raise InvalidParameterError("gap_tolerance must be positive when set")

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "SolverParams":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise InvalidParameterError(f"unknown solver parameters: {sorted(unknown)}")
        return cls(**obj)

    def to_json(self) -> dict[str, Any]:
        return {f: getattr(self, f) for f in self.__dataclass_fields__}


# settings for reference-accuracy solves (oracle comparisons, gradient checks)
TIGHT_PARAMS = SolverParams(epsilon=1e-8, gap_tolerance=1e-9, max_outer=200)


@dataclass(frozen=True)
class ColumnProblem:
    """One column's QP: means ``mu``, variances ``sigma_sq`` (Q = diag(1/sigma_sq))."""

    mu: np.ndarray
    sigma_sq: np.ndarray
    constraints: ConstraintSpec = ConstraintSpec()

    def __post_init__(self):
        mu = _as_vector(self.mu)
        sigma_sq = _as_vector(self.sigma_sq)
        if mu.shape[0] < 1:
            raise InvalidDimensionError("a column needs at least one surface")
        if mu.shape != sigma_sq.shape:
            raise InvalidDimensionError("mu and sigma_sq must have the same length")
        if not np.all(np.isfinite(mu)):
            raise InvalidParameterError("mu must be finite")
        if not np.all(sigma_sq > 0) or not np.all(np.isfinite(sigma_sq)):
            raise InvalidParameterError("sigma_sq must be finite and positive")
        self.constraints.check_size(mu.shape[0])
        mu.setflags(write=False)
        sigma_sq.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma_sq", sigma_sq)

    @property
    def n(self) -> int:
        return self.mu.shape[0]

    @property
    def q_diag(self) -> np.ndarray:
        return 1.0 / self.sigma_sq

    @property
    def Q(self) -> np.ndarray:
        return np.diag(self.q_diag)

    def inequality_system(self):
        """Return ``(G, h, rows)`` for the retained constraints ``G @ s <= h``.

        ``rows`` indexes the retained rows within the full constraint list
        (N-1 rows for adjacency, 2(N-1) for bounded gaps). Rows with an
        infinite bound are dropped because they can never be active.
        """
        n = self.n
        if n < 2:
            return np.zeros((0, n)), np.zeros(0), np.zeros(0, dtype=int)
        if not self.constraints.bounded:
            A = build_adjacency_matrix(n)
            return A, np.zeros(n - 1), np.arange(n - 1)
        B, b = build_bounded_constraints(self.constraints, n)
        rows = np.flatnonzero(np.isfinite(b))
        return B[rows], b[rows], rows

    def cost(self, s) -> float:
        return surface_cost(s, self.mu, self.sigma_sq)

    def to_json(self) -> dict[str, Any]:
        out = {
            "mu": [float(v) for v in self.mu],
            "sigma_sq": [float(v) for v in self.sigma_sq],
            "delta": None,
            "Delta": None,
        }
        if self.constraints.bounded:
            out["delta"] = [float(v) for v in self.constraints.delta]
            out["Delta"] = [_json_float(v) for v in self.constraints.Delta]
        return out

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "ColumnProblem":
        delta = obj.get("delta")
        Delta = obj.get("Delta")
        if delta is None and Delta is None:
            spec = ConstraintSpec()
        else:
            if Delta is not None:
                Delta = [_parse_float(v) for v in Delta]
            spec = ConstraintSpec(delta=delta, Delta=Delta)
        return cls(mu=obj["mu"], sigma_sq=obj["sigma_sq"], constraints=spec)


def build_adjacency_matrix(n: int) -> np.ndarray:
    """(n-1) x n matrix with ``(A @ s)[i] = s[i] - s[i + 1]``."""
    if n < 2:
        raise InvalidDimensionError(f"adjacency matrix needs n >= 2, got {n}")
    A = np.zeros((n - 1, n))
    idx = np.arange(n - 1)
    A[idx, idx] = 1.0
    A[idx, idx + 1] = -1.0
    return A


def build_bounded_constraints(spec: ConstraintSpec, n: int):
    """Stack ``B = [A; -A]`` and ``b = [b1; -b2]`` with ``b1 = -delta``, ``b2 = -Delta``.

    Entries of ``b`` may be ``+inf`` where ``Delta`` is unbounded.
    """
    if not spec.bounded:
        raise InvalidDimensionError("build_bounded_constraints needs a bounded-gap spec")
    spec.check_size(n)
    A = build_adjacency_matrix(n)
    B = np.vstack([A, -A])
    b1 = -spec.delta
    b2 = -spec.Delta
    b = np.concatenate([b1, -b2])
    return B, b


def surface_cost(s, mu, sigma_sq) -> float:
    s = np.asarray(s, dtype=float)
    mu = np.asarray(mu, dtype=float)
    sigma_sq = np.asarray(sigma_sq, dtype=float)
    if s.shape != mu.shape or s.shape != sigma_sq.shape:
        raise InvalidDimensionError("s, mu and sigma_sq must have the same shape")
    return float(np.sum((s - mu) ** 2 / (2.0 * sigma_sq)))


def _as_vector(x) -> np.ndarray:
    arr = np.array(x, dtype=float).reshape(-1)
    return arr


def _json_float(v: float):
    return float(v) if math.isfinite(v) else None


def _parse_float(v) -> float:
    # JSON has no infinity literal; null or "inf" both mean unbounded
    if v is None:
        return math.inf
    return float(v)
