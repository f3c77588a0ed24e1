"""Primal-dual interior point solver for the column QP, plus its backward pass.

The forward loop follows the classic perturbed-KKT Newton scheme: keep the
iterate strictly inside ``G @ s < h``, raise the barrier parameter ``t`` each
outer step from the current duality gap, take a Newton step on the residual

    r_t(s, lam) = [ Q (s - mu) + G^T lam ;  -lam * (G s - h) - 1/t ]

and backtrack until the step is strictly feasible and the residual norm has
decreased enough. The Jacobian of ``r_t`` at the final iterate is factorized
once and reused for the backward pass, which solves
``J^T [d_s; d_lam] = -[dL/ds; 0]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg.lapack import dgetrf as getrf, dgetrs as getrs

from .column_model import ColumnProblem, SolverParams
from .errors import (
    InfeasibleSpecError,
    InvalidDimensionError,
    InvalidParameterError,
    NonConvergenceError,
    StaleSolutionError,
)

LAMBDA_FLOOR = 1e-12
SINGULAR_RTOL = 1e-12
MAX_BACKTRACK = 60


def longest_nondecreasing_subsequence(values) -> list[int]:
    """Indices of a longest non-decreasing subsequence of ``values``.

    Ties are broken deterministically: the subsequence starts as early as
    possible, and each following element is the smallest admissible value
    (earliest index on equal values).
    """
    v = np.asarray(values, dtype=float)
    n = v.shape[0]
    if n == 0:
        return []
    # run[i]: length of the longest non-decreasing run starting at i
    run = np.ones(n, dtype=int)
    for i in range(n - 2, -1, -1):
        later = v[i + 1:] >= v[i]
        if later.any():
            run[i] = 1 + run[i + 1:][later].max()
    best = run.max()
    cur = int(np.argmax(run == best))
    keep = [cur]
    while run[cur] > 1:
        nxt = None
        for j in range(cur + 1, n):
            if v[j] >= v[cur] and run[j] == run[cur] - 1:
                if nxt is None or v[j] < v[nxt]:
                    nxt = j
        keep.append(nxt)
        cur = nxt
    return keep


def lis_initialize(mu, margin: float = 1e-3) -> np.ndarray:
    """Strictly ordered starting point built from a longest ordered subsequence of ``mu``.

    Kept indices take their ``mu`` value, the others copy the nearest kept
    value to the left (to the right before the first kept index), and a final
    sweep pushes every entry at least ``margin`` below its predecessor.
    """
    mu = np.asarray(mu, dtype=float)
    n = mu.shape[0]
    if n == 0:
        return mu.copy()
    keep = longest_nondecreasing_subsequence(mu)
    s = np.empty(n)
    s[: keep[0]] = mu[keep[0]]
    for a, b in zip(keep, keep[1:] + [n]):
        s[a:b] = mu[a]
    for i in range(1, n):
        if s[i] < s[i - 1] + margin:
            s[i] = s[i - 1] + margin
    return s


def bounded_initialize(mu, delta, Delta, margin: float = 1e-3) -> np.ndarray:
    """LIS start followed by a sweep placing each gap strictly inside ``[delta, Delta]``."""
    s = lis_initialize(mu, margin)
    delta = np.asarray(delta, dtype=float)
    Delta = np.asarray(Delta, dtype=float)
    width = Delta - delta
    if np.any(width <= 0):
        raise InfeasibleSpecError(
            "gap bounds with delta == Delta leave no strict interior for the solver"
        )
    # keep a positive slack on both sides even when the admissible window is narrow
    pad = np.minimum(margin, width / 4.0)
    pad = np.where(pad > 0, pad, width / 4.0)
    for i in range(1, s.shape[0]):
        lo = s[i - 1] + delta[i - 1] + pad[i - 1]
        hi = s[i - 1] + Delta[i - 1] - pad[i - 1]
        s[i] = min(max(s[i], lo), hi)
    return s


def residual(s, lam, t, Q, G, mu, h=None) -> np.ndarray:
    """Perturbed KKT residual ``[Q(s-mu) + G^T lam; -lam*(G s - h) - 1/t]``."""
    if not t > 0:
        raise InvalidParameterError(f"barrier parameter t must be positive, got {t}")
    s = np.asarray(s, dtype=float)
    lam = np.asarray(lam, dtype=float)
    Q = np.asarray(Q, dtype=float)
    G = np.asarray(G, dtype=float)
    slack = G @ s if h is None else G @ s - np.asarray(h, dtype=float)
    return np.concatenate([Q @ (s - np.asarray(mu, dtype=float)) + G.T @ lam,
                           -lam * slack - 1.0 / t])


def kkt_jacobian(s, lam, Q, G, h=None) -> np.ndarray:
    """Jacobian ``[[Q, G^T], [-diag(lam) G, -diag(G s - h)]]`` of the residual."""
    s = np.asarray(s, dtype=float)
    lam = np.asarray(lam, dtype=float)
    Q = np.asarray(Q, dtype=float)
    G = np.asarray(G, dtype=float)
    n = s.shape[0]
    m = G.shape[0]
    slack = G @ s if h is None else G @ s - np.asarray(h, dtype=float)
    J = np.zeros((n + m, n + m))
    J[:n, :n] = Q
    J[:n, n:] = G.T
    J[n:, :n] = -lam[:, None] * G
    J[n:, n:] = np.diag(-slack)
    return J


class KKTFactor:
    """Reusable solver for ``J x = r`` and ``J^T x = r``.

    Uses an LU factorization unless a pivot is negligible relative to the
    largest diagonal entry of ``J``, in which case the Moore-Penrose inverse
    is used instead.
    """

    __slots__ = ("matrix", "_lu", "_piv", "_pinv")

    def __init__(self, J: np.ndarray):
        self.matrix = J
        self.matrix.setflags(write=False)
        self._lu = self._piv = self._pinv = None
        if not J.size:
            return
        scale = np.abs(J.diagonal()).max()
        # LAPACK directly: scipy's lu_factor wrapper dominates the cost of these tiny systems
        lu, piv, info = getrf(J)
        pivots = np.abs(lu.diagonal())
        if info < 0 or not np.isfinite(lu).all() or pivots.min() < SINGULAR_RTOL * scale:
            self._pinv = np.linalg.pinv(J)
            self._pinv.setflags(write=False)
        else:
            self._lu, self._piv = lu, piv

    @property
    def used_pseudo_inverse(self) -> bool:
        return self._pinv is not None

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._pinv is not None:
            return self._pinv @ rhs
        return getrs(self._lu, self._piv, rhs)[0]

    def solve_transpose(self, rhs: np.ndarray) -> np.ndarray:
        if self._pinv is not None:
            return self._pinv.T @ rhs
        return getrs(self._lu, self._piv, rhs, trans=1)[0]


@dataclass(frozen=True)
class Solution:
    """Result of a forward solve.

    ``lambda_star`` and ``rows`` refer to the retained constraint rows; ``G``
    and ``h`` are those rows (``h`` is zero for adjacency constraints).
    """

    s_star: np.ndarray
    lambda_star: np.ndarray
    jacobian_factorization: Optional[KKTFactor]
    iterations: int
    residual_norm: float
    used_pseudo_inverse: bool
    converged: bool
    t: float
    G: np.ndarray
    h: np.ndarray
    rows: np.ndarray
    n_rows_full: int

    @property
    def slack(self) -> np.ndarray:
        return self.h - self.G @ self.s_star

    def full_lambda(self) -> np.ndarray:
        """Duals scattered to the full row list, zero for dropped rows."""
        out = np.zeros(self.n_rows_full)
        out[self.rows] = self.lambda_star
        return out


@dataclass(frozen=True)
class BackwardGradients:
    """Gradients of a scalar loss w.r.t. the QP inputs.

    ``dL_db`` is ``None`` for adjacency constraints; for bounded gaps it has
    one entry per row of ``b = [-delta; Delta]`` (zero for dropped rows).
    """

    dL_dmu: np.ndarray
    dL_dQ: np.ndarray
    dL_db: Optional[np.ndarray] = None
    d_s: Optional[np.ndarray] = None
    d_lambda: Optional[np.ndarray] = None

    def dL_dsigma_sq(self, sigma_sq) -> np.ndarray:
        """Chain ``dL/dQ`` through ``Q_ii = 1/sigma_sq_i``."""
        sigma_sq = np.asarray(sigma_sq, dtype=float)
        return -np.diag(self.dL_dQ) / sigma_sq**2

    def dL_ddelta(self) -> Optional[np.ndarray]:
        if self.dL_db is None:
            return None
        m = self.dL_db.shape[0] // 2
        return -self.dL_db[:m]

    def dL_dDelta(self) -> Optional[np.ndarray]:
        if self.dL_db is None:
            return None
        m = self.dL_db.shape[0] // 2
        return self.dL_db[m:]


def _initial_point(problem: ColumnProblem, params: SolverParams) -> np.ndarray:
    spec = problem.constraints
    if spec.bounded:
        return bounded_initialize(problem.mu, spec.delta, spec.Delta,
                                  params.feasibility_margin)
    return lis_initialize(problem.mu, params.feasibility_margin)


def _solve(problem: ColumnProblem, params: SolverParams) -> Solution:
    mu = problem.mu
    n = problem.n
    q = problem.q_diag
    Q = np.diag(q)
    G, h, rows = problem.inequality_system()
    n_full = 0 if n < 2 else (n - 1) * (2 if problem.constraints.bounded else 1)
    m = G.shape[0]

    if m == 0:
        s = mu.copy()
        return Solution(s_star=s, lambda_star=np.zeros(0),
                        jacobian_factorization=KKTFactor(Q.copy()), iterations=0,
                        residual_norm=0.0, used_pseudo_inverse=False, converged=True,
                        t=np.inf, G=G, h=h, rows=rows, n_rows_full=n_full)

    s = _initial_point(problem, params)
    if params.feasibility_margin == 0 and not np.all(G @ s - h < 0):
        # a zero margin can leave ties; nudge to the strict interior
        s = _initial_point(problem, SolverParams(feasibility_margin=1e-9))
    lam = np.full(m, float(params.lambda0))
    GT = G.T
    beta1, beta2, beta3 = params.beta1, params.beta2, params.beta3
    diag_m = n + np.arange(m)
    # constant blocks of the Jacobian; the lower row is refilled per iterate
    J_top = np.zeros((n, n + m))
    J_top[:, :n] = Q
    J_top[:, n:] = GT

    def jacobian(s_, lam_, slack_):
        J_ = np.empty((n + m, n + m))
        J_[:n] = J_top
        J_[n:, :n] = -lam_[:, None] * G
        J_[n:, n:] = 0.0
        J_[diag_m, diag_m] = -slack_
        return J_

    def r_norm(s_, lam_, t_):
        r1 = q * (s_ - mu) + GT @ lam_
        r2 = -lam_ * (G @ s_ - h) - 1.0 / t_
        return math.sqrt(r1 @ r1 + r2 @ r2)

    used_pinv = False
    converged = False
    rnorm = np.inf
    t = np.nan
    it = 0
    while it < params.max_outer:
        it += 1
        s0, lam0 = s, lam
        slack0 = G @ s0 - h
        t = -beta3 * m / (slack0 @ lam0)
        r0 = np.concatenate([q * (s0 - mu) + GT @ lam0, -lam0 * slack0 - 1.0 / t])
        factor = KKTFactor(jacobian(s0, lam0, slack0))
        used_pinv |= factor.used_pseudo_inverse
        step = -factor.solve(r0)
        ds, dlam = step[:n], step[n:]

        neg = dlam < 0
        alpha = 1.0
        if neg.any():
            alpha = min(1.0, float((-lam0[neg] / dlam[neg]).min()))

        def trial(a):
            return s0 + a * ds, np.maximum(lam0 + a * dlam, LAMBDA_FLOOR)

        s, lam = trial(alpha)
        k = 0
        while not (G @ s - h < 0).all() and k < MAX_BACKTRACK:
            alpha *= beta1
            s, lam = trial(alpha)
            k += 1
        if not (G @ s - h < 0).all():
            s, lam = s0, lam0
            alpha = 0.0
        norm0 = math.sqrt(r0 @ r0)
        rnorm = r_norm(s, lam, t)
        k = 0
        while rnorm > (1.0 - beta2 * alpha) * norm0 and k < MAX_BACKTRACK:
            alpha *= beta1
            s, lam = trial(alpha)
            rnorm = r_norm(s, lam, t)
            k += 1
        if rnorm < params.epsilon and (
                params.gap_tolerance is None
                or -((G @ s - h) @ lam) < params.gap_tolerance):
            converged = True
            break

    final = KKTFactor(jacobian(s, lam, G @ s - h))
    used_pinv |= final.used_pseudo_inverse
    s.setflags(write=False)
    lam.setflags(write=False)
    return Solution(s_star=s, lambda_star=lam, jacobian_factorization=final,
                    iterations=it, residual_norm=float(rnorm),
                    used_pseudo_inverse=bool(used_pinv), converged=converged,
                    t=float(t), G=G, h=h, rows=rows, n_rows_full=n_full)


def solve(problem: ColumnProblem, params: SolverParams = SolverParams()) -> Solution:
    """Solve either constraint variant; raises NonConvergenceError on failure."""
    sol = _solve(problem, params)
    if not sol.converged:
        raise NonConvergenceError(
            f"no convergence after {sol.iterations} iterations "
            f"(residual {sol.residual_norm:.3g} >= {params.epsilon:g})",
            solution=sol,
        )
    return sol


def solve_forward(problem: ColumnProblem, params: SolverParams = SolverParams()) -> Solution:
    if problem.constraints.bounded:
        raise InvalidDimensionError("solve_forward expects adjacency constraints; "
                                    "use solve_forward_bounded")
    return solve(problem, params)


def solve_forward_bounded(problem: ColumnProblem,
                          params: SolverParams = SolverParams()) -> Solution:
    if not problem.constraints.bounded:
        raise InvalidDimensionError("solve_forward_bounded expects gap bounds")
    return solve(problem, params)


def backward(dL_ds, solution: Solution, problem: ColumnProblem) -> BackwardGradients:
    """Implicit-differentiation gradients from the saved KKT factorization."""
    if not solution.converged:
        raise StaleSolutionError("refusing to differentiate an unconverged solution")
    g = np.asarray(dL_ds, dtype=float).reshape(-1)
    n = problem.n
    if g.shape[0] != n:
        raise InvalidDimensionError(f"dL_ds has length {g.shape[0]}, expected {n}")
    m = solution.lambda_star.shape[0]
    rhs = np.concatenate([-g, np.zeros(m)])
    d = solution.jacobian_factorization.solve_transpose(rhs)
    d_s, d_lam = d[:n], d[n:]
    q = problem.q_diag
    dL_dmu = -q * d_s
    dL_dQ = np.outer(d_s, solution.s_star - problem.mu)
    dL_db = None
    if problem.constraints.bounded:
        # b enters only the slackness rows: d r2 / d b = diag(lam)
        dL_db = np.zeros(solution.n_rows_full)
        dL_db[solution.rows] = d_lam * solution.lambda_star
    return BackwardGradients(dL_dmu=dL_dmu, dL_dQ=dL_dQ, dL_db=dL_db,
                             d_s=d_s, d_lambda=d_lam)


def solve_and_grad(problem: ColumnProblem, params: SolverParams, dL_ds):
    sol = solve(problem, params)
    return sol, backward(dL_ds, sol, problem)
