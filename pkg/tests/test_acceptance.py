"""Acceptance criteria AC-1 .. AC-8.

Each test prints one ``AC-k PASS|FAIL: ...`` line (also collected into the
terminal summary). Run directly with ``python tests/test_acceptance.py`` for
the lines alone.
"""
import json
import time

import numpy as np
import pytest

from surfopt.batch import infer_from_maps
from surfopt.cli import main as cli_main
from surfopt.column_model import TIGHT_PARAMS, ColumnProblem, SolverParams
from surfopt.ipm import _solve, solve, solve_and_grad
from surfopt.losses import (generalized_dice, l1_surface_loss, smooth_loss, total_loss,
                            weighted_divergence)
from surfopt.metrics import count_violations
from surfopt.oracles import active_set_oracle, pav_isotonic, random_problem, run_gradcheck_suite
from surfopt.surface_head import expected_location, fuse_mu, gaussian_gt, sigma_sq_from_dist
from surfopt.synth import SynthSpec, synth_generate

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script
    ACCEPTANCE_LINES = {}

FEAS_TOL = 1e-6
# worst constraint violation seen by any acceptance solve, keyed by suite
FEASIBILITY: dict[str, float] = {}


def report(key, ok, detail):
    line = f"{key} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES[key] = line
    print(line)
    return ok


def violation(sol):
    return float(max(0.0, (sol.G @ sol.s_star - sol.h).max())) if sol.G.shape[0] else 0.0


def adjacency_problems(rng, count, n_lo, n_hi):
    out = []
    for _ in range(count):
        n = int(rng.integers(n_lo, n_hi + 1))
        out.append(ColumnProblem(rng.uniform(0, 100, n), rng.uniform(0.25, 25, n)))
    return out


@pytest.fixture(scope="module")
def ac1_run():
    problems = adjacency_problems(np.random.default_rng(2024), 10_000, 2, 12)
    t0 = time.perf_counter()
    sols = [_solve(p, SolverParams()) for p in problems]
    elapsed = time.perf_counter() - t0
    FEASIBILITY["AC-1"] = max(violation(s) for s in sols)
    return sols, elapsed


def test_ac1_convergence_budget(ac1_run):
    sols, elapsed = ac1_run
    iters = np.array([s.iterations if s.converged else 10**6 for s in sols])
    within7 = float(np.mean(iters <= 7))
    within_cap = float(np.mean(iters <= 50))
    ok = within7 >= 0.99 and within_cap == 1.0 and elapsed < 10.0
    report("AC-1", ok,
           f"{within7:.2%} within 7 iterations (need >= 99%), {within_cap:.2%} within 50 "
           f"(need 100%), max {iters.max()} iterations, sweep {elapsed:.2f} s (need < 10 s)")
    assert within_cap == 1.0, "some problems missed the max_outer cap"
    assert elapsed < 10.0, "sweep too slow"
    assert within7 >= 0.99, "iteration budget of 7 not met on 99% of problems"


def test_ac2_oracle_equivalence():
    rng = np.random.default_rng(7)
    worst_as, worst_pav, worst_feas = 0.0, 0.0, 0.0
    for k in range(1000):
        p = random_problem(rng, int(rng.integers(2, 7)), bounded=bool(k % 2))
        sol = solve(p, TIGHT_PARAMS)
        worst_feas = max(worst_feas, violation(sol))
        worst_as = max(worst_as, float(np.abs(sol.s_star - active_set_oracle(p)).max()))
    for p in adjacency_problems(rng, 1000, 2, 64):
        sol = solve(p, TIGHT_PARAMS)
        worst_feas = max(worst_feas, violation(sol))
        worst_pav = max(worst_pav, float(np.abs(sol.s_star - pav_isotonic(p.mu, p.q_diag)).max()))
    FEASIBILITY["AC-2"] = worst_feas
    ok = worst_as <= 1e-3 and worst_pav <= 1e-3
    report("AC-2", ok, f"max |ipm - active set| = {worst_as:.2e}, "
                       f"max |ipm - PAV| = {worst_pav:.2e} (need <= 1e-3)")
    assert ok


def test_ac3_gradient_fidelity():
    r = run_gradcheck_suite(n_cases=500, seed=42, threshold=1e-3, h=1e-4)
    p = ColumnProblem([5, 3], [1, 1])
    sol, g = solve_and_grad(p, SolverParams(), [1, 0])
    hand_mu = float(np.abs(g.dL_dmu - [0.5, 0.5]).max())
    hand_q = float(np.abs(g.dL_dQ - [[0.5, -0.5], [0.5, -0.5]]).max())
    hand_ds = float(np.abs(g.d_s - [-0.5, -0.5]).max())
    errs = (r.max_rel_error_mu, r.max_rel_error_Q, r.max_rel_error_b)
    ok = max(errs) <= 1e-2 and max(hand_mu, hand_q, hand_ds) <= 1e-3
    report("AC-3", ok,
           f"rel err mu {errs[0]:.1e}, Q {errs[1]:.1e}, b {errs[2]:.1e} (need <= 1e-2) over "
           f"{r.n_cases - r.n_skipped_degenerate} checked / {r.n_skipped_degenerate} skipped; "
           f"hand KKT examples off by {max(hand_mu, hand_q, hand_ds):.1e}")
    assert r.n_cases == 500 and r.n_skipped_degenerate < r.n_cases
    assert ok


def test_ac4_feasibility_everywhere(ac1_run):
    # gradcheck-style problems (both variants) at the suite's solver settings
    rng = np.random.default_rng(42)
    worst = 0.0
    for k in range(500):
        p = random_problem(rng, int(rng.integers(2, 7)), bounded=bool(k % 2))
        rng.normal(size=p.n)  # keep the draw sequence of the gradcheck suite
        worst = max(worst, violation(solve(p, TIGHT_PARAMS)))
    FEASIBILITY["gradcheck"] = worst
    field, _ = synth_generate(SynthSpec())
    out = infer_from_maps(field, workers=1)
    synth_viol = count_violations(out.positions)
    if "AC-2" not in FEASIBILITY:
        rng2 = np.random.default_rng(7)
        FEASIBILITY["AC-2"] = max(
            violation(solve(random_problem(rng2, int(rng2.integers(2, 7)), bool(k % 2)),
                            TIGHT_PARAMS)) for k in range(1000))
    worst_all = max(FEASIBILITY.values())
    ok = worst_all <= FEAS_TOL and synth_viol == 0
    report("AC-4", ok, f"max constraint violation {worst_all:.1e} across "
                       f"{', '.join(sorted(FEASIBILITY))} (need <= 1e-6); "
                       f"synthetic pipeline violations {synth_viol}")
    assert ok


def test_ac5_parameterization_identities():
    errs = [
        abs(fuse_mu(10, 12, 0, 2) - 12),
        abs(fuse_mu(10, 12, 1, 2) - 11),
        abs(fuse_mu(10, 12, 0.5, 2) - 11.5),
        abs(sigma_sq_from_dist([0.5, 0.5], 0.5) - 0.25),
        abs(sigma_sq_from_dist([1 / 3] * 3, 1.0) - 2 / 3),
        abs(sigma_sq_from_dist([0, 1, 0], 1.0) - 0.01),
    ]
    worst_rt = 0.0
    for sigma in (1.0, 4.0, 8.0):
        Z = 128
        for mu in np.linspace(3 * sigma, Z - 1 - 3 * sigma, 101):
            worst_rt = max(worst_rt, abs(expected_location(gaussian_gt(mu, sigma, Z)) - mu))
    ok = max(errs) <= 1e-9 and worst_rt <= 0.05
    report("AC-5", ok, f"hand identities off by {max(errs):.1e} (need <= 1e-9); "
                       f"gaussian round trip max error {worst_rt:.3f} px (need <= 0.05)")
    assert ok


def test_ac6_loss_identities():
    rng = np.random.default_rng(11)
    p = rng.random((4, 6))
    p /= p.sum()
    div_equal = weighted_divergence(p, p, rng.uniform(1, 5, p.shape))
    labels = rng.integers(0, 3, (8, 8))
    onehot = (labels[None] == np.arange(3)[:, None, None]).astype(float)
    gd_perfect = generalized_dice(onehot, onehot)
    two = (labels[None] % 2 == np.arange(2)[:, None, None]).astype(float)
    gd_disjoint = generalized_dice(two[::-1], two)
    s = rng.normal(size=(3, 9))
    sm = smooth_loss(s, s)
    total_err = 0.0
    for _ in range(1000):
        a, b, c, d = rng.random(4) * 10
        total_err = max(total_err, abs(total_loss(a, b, c, d).total - (a + b + c + 10 * d)))
    l1 = l1_surface_loss(s, s)
    ok = (div_equal == 0 and abs(gd_perfect) <= 1e-9 and abs(gd_disjoint - 1) <= 1e-12
          and sm == 0 and l1 == 0 and total_err == 0)
    report("AC-6", ok, f"Div(p=g)={div_equal}, GDice perfect={gd_perfect:.1e}, "
                       f"disjoint={gd_disjoint}, smooth(pred=gt)={sm}, "
                       f"total identity max error {total_err}")
    assert ok


def test_ac7_synthetic_pipeline(tmp_path):
    fx = tmp_path / "fx"
    t0 = time.perf_counter()
    codes = [cli_main(["synth", "--out", str(fx), "--N", "3", "--Z", "64", "--W", "32",
                       "--noise", "0.5", "--gt-sigma", "8", "--seed", "42"]),
             cli_main(["infer", "--in", str(fx), "--out", str(tmp_path / "pred.csv"),
                       "--workers", "1"]),
             cli_main(["eval", "--pred", str(tmp_path / "pred.csv"), "--gt", str(fx / "gt.csv"),
                       "--out", str(tmp_path / "eval.json")])]
    elapsed = time.perf_counter() - t0
    ev = json.loads((tmp_path / "eval.json").read_text())
    # determinism: a second run reproduces the prediction bit for bit
    fx2 = tmp_path / "fx2"
    cli_main(["synth", "--out", str(fx2), "--seed", "42"])
    cli_main(["infer", "--in", str(fx2), "--out", str(tmp_path / "pred2.csv"), "--workers", "1"])
    same = (tmp_path / "pred.csv").read_bytes() == (tmp_path / "pred2.csv").read_bytes()
    per = ev["masd_per_surface"]
    ok = (codes == [0, 0, 0] and max(per) <= 0.5 and ev["violation_count"] == 0 and same
          and elapsed < 1.0)
    report("AC-7", ok, f"MASD per surface {[round(v, 3) for v in per]} px (need <= 0.5), "
                       f"violations {ev['violation_count']}, deterministic {same}, "
                       f"wall {elapsed:.3f} s (need < 1 s)")
    assert ok


def test_ac8_worker_determinism(tmp_path):
    fx = tmp_path / "fx"
    cli_main(["synth", "--out", str(fx), "--seed", "42", "--W", "256"])
    a, b = tmp_path / "w1.csv", tmp_path / "w8.csv"
    c1 = cli_main(["infer", "--in", str(fx), "--out", str(a), "--workers", "1"])
    c8 = cli_main(["infer", "--in", str(fx), "--out", str(b), "--workers", "8"])
    same = a.read_bytes() == b.read_bytes()
    ok = c1 == 0 and c8 == 0 and same
    report("AC-8", ok, f"--workers 1 vs --workers 8 output files identical: {same}")
    assert ok


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-s"]))
