"""Column-parallel surface inference over a whole image."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .column_model import ColumnProblem, ConstraintSpec, SolverParams
from .errors import BatchFailureError, InvalidDimensionError, NonConvergenceError
from .ipm import solve
from .surface_head import FusionParams, ProbabilityField, parameterize_field

WORKERS_ENV = "SURFOPT_WORKERS"


@dataclass
class FieldDiagnostics:
    iterations: np.ndarray
    residuals: np.ndarray
    used_pseudo_inverse: np.ndarray
    converged: np.ndarray
    clamped: Optional[np.ndarray] = None
    confidence: Optional[np.ndarray] = None

    @property
    def n_failed(self) -> int:
        return int(np.count_nonzero(~self.converged))


@dataclass
class SurfaceField:
    """Surface heights, shape ``(N, W)``: row ``i`` is surface ``i`` across columns."""

    positions: np.ndarray
    diagnostics: Optional[FieldDiagnostics] = field(default=None, repr=False)

    @property
    def shape(self):
        return self.positions.shape

    def violation_count(self, tol: float = 1e-6) -> int:
        p = self.positions
        return int(np.count_nonzero(p[:-1] > p[1:] + tol))


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def feasibility_sweep(s, spec: ConstraintSpec) -> np.ndarray:
    """Left-to-right projection onto the gap constraints (cumulative max with gaps)."""
    s = np.array(s, dtype=float)
    for i in range(1, s.shape[0]):
        lo = s[i - 1] + (spec.delta[i - 1] if spec.bounded else 0.0)
        hi = s[i - 1] + (spec.Delta[i - 1] if spec.bounded else np.inf)
        s[i] = min(max(s[i], lo), hi)
    return s


def _solve_columns(args):
    mu_cols, var_cols, spec, params = args
    out = []
    for mu, var in zip(mu_cols, var_cols):
        problem = ColumnProblem(mu, var, spec)
        try:
            sol = solve(problem, params)
        except NonConvergenceError as exc:
            sol = exc.solution
        s = np.asarray(sol.s_star)
        if not sol.converged:
            s = feasibility_sweep(s, spec)
        out.append((s, sol.iterations, sol.residual_norm, sol.used_pseudo_inverse,
                    sol.converged))
    return out


def _chunks(n: int, k: int):
    bounds = np.linspace(0, n, k + 1).astype(int)
    return [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def solve_field(mu_field, sigma_sq_field, constraints: ConstraintSpec = ConstraintSpec(),
                params: SolverParams = SolverParams(),
                workers: Optional[int] = None) -> SurfaceField:
    """Solve every column's QP independently and assemble an ``(N, W)`` field.

    Columns that fail to converge keep their last iterate (projected onto the
    constraints) and are flagged in the diagnostics; only a batch in which
    every column fails raises.
    """
    mu = np.asarray(mu_field, dtype=float)
    var = np.asarray(sigma_sq_field, dtype=float)
    if mu.ndim != 2 or mu.shape != var.shape:
        raise InvalidDimensionError(
            f"mu and sigma_sq fields must share an (N, W) shape, got {mu.shape} and {var.shape}")
    n, w = mu.shape
    constraints.check_size(n)
    workers = default_workers() if workers is None else max(1, int(workers))
    workers = min(workers, w) if w else 1

    cols_mu = mu.T
    cols_var = var.T
    if workers == 1:
        results = _solve_columns((cols_mu, cols_var, constraints, params))
    else:
        jobs = [(cols_mu[a:b], cols_var[a:b], constraints, params)
                for a, b in _chunks(w, workers)]
        results = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_solve_columns, jobs):
                results.extend(part)

    positions = np.empty((n, w))
    iters = np.zeros(w, dtype=int)
    resid = np.zeros(w)
    pinv = np.zeros(w, dtype=bool)
    conv = np.zeros(w, dtype=bool)
    for q, (s, it, r, pi, ok) in enumerate(results):
        positions[:, q] = s
        iters[q], resid[q], pinv[q], conv[q] = it, r, pi, ok
    diag = FieldDiagnostics(iterations=iters, residuals=resid,
                            used_pseudo_inverse=pinv, converged=conv)
    result = SurfaceField(positions=positions, diagnostics=diag)
    if w and not conv.any():
        raise BatchFailureError("every column failed to converge", field=result)
    return result


def infer_from_maps(field: ProbabilityField, fusion: FusionParams = FusionParams(),
                    constraints: ConstraintSpec = ConstraintSpec(),
                    params: SolverParams = SolverParams(),
                    workers: Optional[int] = None) -> SurfaceField:
    mu, sigma_sq, confidence, clamped = parameterize_field(field, fusion)
    result = solve_field(mu, sigma_sq, constraints, params, workers)
    result.diagnostics.clamped = clamped
    result.diagnostics.confidence = confidence
    return result
