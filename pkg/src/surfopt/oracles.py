"""Independent reference solvers and finite-difference gradient checks.

None of these share code paths with the interior point solver: the
active-set oracle enumerates candidate active sets and solves each
equality-constrained QP directly, and PAV is the classical pooling
algorithm for weighted isotonic regression.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass

import numpy as np

from .column_model import (
    TIGHT_PARAMS,
    ColumnProblem,
    ConstraintSpec,
    SolverParams,
    build_bounded_constraints,
    surface_cost,
)
from .errors import InvalidDimensionError, NonConvergenceError, OracleFailureError
from . import ipm

# the analytic and numeric routes must both see the (nearly) unperturbed QP optimum
GRADCHECK_PARAMS = TIGHT_PARAMS

MAX_ACTIVE_SET_N = 12
MAX_ACTIVE_SET_N_BOUNDED = 6


def active_set_oracle(problem: ColumnProblem, tol: float = 1e-9) -> np.ndarray:
    """Exact QP optimum by enumerating every candidate active set."""
    n = problem.n
    limit = MAX_ACTIVE_SET_N_BOUNDED if problem.constraints.bounded else MAX_ACTIVE_SET_N
    if n > limit:
        raise InvalidDimensionError(f"active-set enumeration is limited to N <= {limit}")
    G, h, rows = problem.inequality_system()
    m = G.shape[0]
    q = problem.q_diag
    mu = problem.mu
    if m == 0:
        return mu.copy()

    # rows r and r + (N-1) bound the same gap from both sides; with delta < Delta
    # they cannot be active together, so each gap contributes at most one row
    gap_of_row = rows % (n - 1)
    choices = []
    for gap in range(n - 1):
        options = [None] + [k for k in range(m) if gap_of_row[k] == gap]
        choices.append(options)

    best = None
    best_cost = np.inf
    scale = 1.0 + np.abs(mu).max() + np.abs(h).max()
    for combo in itertools.product(*choices):
        active = [k for k in combo if k is not None]
        Ga = G[active]
        k = len(active)
        K = np.zeros((n + k, n + k))
        K[:n, :n] = np.diag(q)
        K[:n, n:] = Ga.T
        K[n:, :n] = Ga
        rhs = np.concatenate([q * mu, h[active]])
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError:
            continue
        s, lam = sol[:n], sol[n:]
        if np.any(G @ s - h > tol * scale):
            continue
        if np.any(lam < -tol * scale):
            continue
        cost = surface_cost(s, mu, problem.sigma_sq)
        if cost < best_cost:
            best, best_cost = s, cost
    if best is None:
        raise OracleFailureError("no primal and dual feasible active set found")
    return best


def pav_isotonic(mu, weights) -> np.ndarray:
    """Weighted least-squares non-decreasing fit via pool adjacent violators."""
    y = np.asarray(mu, dtype=float)
    w = np.asarray(weights, dtype=float)
    if y.shape != w.shape:
        raise InvalidDimensionError("mu and weights must have the same length")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    # stack of blocks: (weighted mean, total weight, length)
    means: list[float] = []
    totals: list[float] = []
    sizes: list[int] = []
    for yi, wi in zip(y, w):
        means.append(float(yi))
        totals.append(float(wi))
        sizes.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            m2, w2, n2 = means.pop(), totals.pop(), sizes.pop()
            m1, w1, n1 = means.pop(), totals.pop(), sizes.pop()
            wt = w1 + w2
            means.append((w1 * m1 + w2 * m2) / wt)
            totals.append(wt)
            sizes.append(n1 + n2)
    return np.repeat(means, sizes)


def _loss(problem: ColumnProblem, dL_ds: np.ndarray, params: SolverParams):
    sol = ipm.solve(problem, params)
    return float(dL_ds @ sol.s_star), sol


def _with(problem: ColumnProblem, mu=None, sigma_sq=None, b=None) -> ColumnProblem:
    spec = problem.constraints
    if b is not None:
        m = problem.n - 1
        spec = ConstraintSpec(delta=-b[:m], Delta=b[m:])
    return ColumnProblem(mu=problem.mu if mu is None else mu,
                         sigma_sq=problem.sigma_sq if sigma_sq is None else sigma_sq,
                         constraints=spec)


def _active_pattern(sol: ipm.Solution) -> np.ndarray:
    return sol.lambda_star > sol.slack


def finite_diff_gradients(problem: ColumnProblem, dL_ds, h: float = 1e-4,
                          params: SolverParams = GRADCHECK_PARAMS):
    """Central differences of ``L = dL_ds . s*`` w.r.t. mu, diag(Q) and b.

    Returns ``(dmu, dQ_diag, db)``; ``db`` is None for adjacency problems and
    has zeros at rows whose bound is infinite. Raises NonConvergenceError if
    any perturbed solve fails or moves to a different active set.
    """
    g = np.asarray(dL_ds, dtype=float)
    n = problem.n
    _, base = _loss(problem, g, params)
    pattern = _active_pattern(base)

    def central(make):
        vals = []
        for sign in (1.0, -1.0):
            val, sol = _loss(make(sign * h), g, params)
            if not np.array_equal(_active_pattern(sol), pattern):
                raise NonConvergenceError("perturbation changed the active set")
            vals.append(val)
        return (vals[0] - vals[1]) / (2 * h)

    dmu = np.empty(n)
    for i in range(n):
        def make(eps, i=i):
            mu = problem.mu.copy()
            mu[i] += eps
            return _with(problem, mu=mu)
        dmu[i] = central(make)

    dq = np.empty(n)
    q = problem.q_diag
    for i in range(n):
        def make(eps, i=i):
            qq = q.copy()
            qq[i] += eps
            return _with(problem, sigma_sq=1.0 / qq)
        dq[i] = central(make)

    db = None
    if problem.constraints.bounded:
        _, b_full = _full_b(problem)
        db = np.zeros(b_full.shape[0])
        for r in np.flatnonzero(np.isfinite(b_full)):
            def make(eps, r=r):
                bb = b_full.copy()
                bb[r] += eps
                return _with(problem, b=bb)
            db[r] = central(make)
    return dmu, dq, db


def _full_b(problem: ColumnProblem):
    return build_bounded_constraints(problem.constraints, problem.n)


# an inactive constraint with slack u leaves a barrier term ~ sigma_sq * gap / u**2
# in both gradient routes (gap ~ 1e-9 is the tightest reliable setting), so
# entries below this floor are compared with absolute tolerance floor * rtol
RELATIVE_ERROR_FLOOR = 1e-2


def relative_error(analytic, numeric, floor: float = RELATIVE_ERROR_FLOOR) -> float:
    """Max-norm discrepancy scaled by the larger of the two gradients (or ``floor``)."""
    a = np.asarray(analytic, dtype=float)
    b = np.asarray(numeric, dtype=float)
    if a.size == 0:
        return 0.0
    denom = max(np.abs(a).max(), np.abs(b).max(), floor)
    return float(np.abs(a - b).max() / denom)


@dataclass
class GradCheckReport:
    max_rel_error_mu: float = 0.0
    max_rel_error_Q: float = 0.0
    max_rel_error_b: float = 0.0
    n_cases: int = 0
    n_skipped_degenerate: int = 0
    n_checked_bounded: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def random_problem(rng: np.random.Generator, n: int, bounded: bool) -> ColumnProblem:
    mu = rng.uniform(0, 100, n)
    sigma_sq = rng.uniform(0.25, 25, n)
    if not bounded:
        return ColumnProblem(mu, sigma_sq)
    delta = rng.uniform(0, 10, n - 1)
    Delta = delta + rng.uniform(1, 40, n - 1)
    # leave some gaps without an upper bound
    Delta[rng.random(n - 1) < 0.3] = np.inf
    return ColumnProblem(mu, sigma_sq, ConstraintSpec(delta=delta, Delta=Delta))


def is_strictly_complementary(sol: ipm.Solution, threshold: float = 1e-3) -> bool:
    lam = sol.lambda_star
    slack = sol.slack
    active = lam > slack
    return bool(np.all(np.where(active, lam, slack) > threshold))


def run_gradcheck_suite(n_cases: int = 500, seed: int = 42, threshold: float = 1e-3,
                        h: float = 1e-4, n_range=(2, 6),
                        params: SolverParams = GRADCHECK_PARAMS) -> GradCheckReport:
    """Compare analytic backward gradients with central differences on random problems.

    Even-numbered cases use adjacency constraints, odd ones bounded gaps.
    Cases that are not strictly complementary at ``threshold`` (or whose
    perturbed solves fail) are counted as skipped, not failed.
    """
    rng = np.random.default_rng(seed)
    report = GradCheckReport()
    for k in range(n_cases):
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        problem = random_problem(rng, n, bounded=bool(k % 2))
        dL_ds = rng.normal(size=n)
        report.n_cases += 1
        try:
            sol = ipm.solve(problem, params)
        except NonConvergenceError:
            report.n_skipped_degenerate += 1
            continue
        if not is_strictly_complementary(sol, threshold):
            report.n_skipped_degenerate += 1
            continue
        try:
            dmu, dq, db = finite_diff_gradients(problem, dL_ds, h, params)
        except (NonConvergenceError, ValueError):
            # ValueError: a perturbation pushed delta below zero
            report.n_skipped_degenerate += 1
            continue
        grads = ipm.backward(dL_ds, sol, problem)
        report.max_rel_error_mu = max(report.max_rel_error_mu,
                                      relative_error(grads.dL_dmu, dmu))
        report.max_rel_error_Q = max(report.max_rel_error_Q,
                                     relative_error(np.diag(grads.dL_dQ), dq))
        if db is not None:
            report.n_checked_bounded += 1
            report.max_rel_error_b = max(report.max_rel_error_b,
                                         relative_error(grads.dL_db, db))
    return report
