"""``surfopt`` command-line entry point.

Exit status: 0 on success, 1 on I/O or validation errors (including an
unknown subcommand), 2 when a required solve does not converge.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .batch import infer_from_maps
from .column_model import ConstraintSpec, SolverParams
from .errors import BatchFailureError, NonConvergenceError
from .ipm import solve
from .losses import (DEFAULT_ALPHA, DEFAULT_L1_WEIGHT, generalized_dice, gradient_weights,
                     l1_surface_loss, smooth_loss, total_loss, weighted_divergence)
from .metrics import masd
from .oracles import run_gradcheck_suite
from .surface_head import FusionParams, gaussian_gt
from .synth import SynthSpec, region_labels_from_positions, synth_generate

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; we reserve 2 for non-convergence
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _float_list(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(",") if v.strip()], dtype=float)


def _load_params(arg, default: SolverParams = SolverParams()) -> SolverParams:
    if arg is None:
        return default
    path = Path(arg)
    obj = json.loads(path.read_text()) if path.exists() else json.loads(arg)
    return SolverParams.from_json(obj)


def _constraints(args, n: int) -> ConstraintSpec:
    if args.delta is None and args.Delta is None:
        return ConstraintSpec()
    delta = _float_list(args.delta) if args.delta is not None else None
    Delta = _float_list(args.Delta) if args.Delta is not None else None
    # a single value applies to every gap
    if delta is not None and delta.size == 1:
        delta = np.repeat(delta, n - 1)
    if Delta is not None and Delta.size == 1:
        Delta = np.repeat(Delta, n - 1)
    spec = ConstraintSpec(delta=delta, Delta=Delta)
    spec.check_size(n)
    return spec


def _emit(obj, out) -> None:
    text = json.dumps(obj, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def cmd_solve(args) -> int:
    problems = io.read_problems(args.inp)
    params = _load_params(args.params)
    results, failed = [], 0
    for problem in problems:
        try:
            sol = solve(problem, params)
        except NonConvergenceError as exc:
            sol, failed = exc.solution, failed + 1
        results.append(io.solution_to_json(sol))
    _emit(results, args.out)
    if failed:
        print(f"{failed} of {len(problems)} problems did not converge", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_infer(args) -> int:
    field = io.read_field(args.inp)
    n = field.shape[0]
    code = EXIT_OK
    try:
        result = infer_from_maps(field, FusionParams(kappa=args.kappa), _constraints(args, n),
                                 _load_params(args.params), workers=args.workers)
    except BatchFailureError as exc:
        result, code = exc.field, EXIT_NONCONVERGED
    if result.diagnostics.n_failed:
        print(f"{result.diagnostics.n_failed} columns did not converge", file=sys.stderr)
        code = EXIT_NONCONVERGED
    io.write_csv(args.out, result.positions)
    return code


def cmd_synth(args) -> int:
    spec = SynthSpec(N=args.N, Z=args.Z, W=args.W, amplitude=args.amplitude,
                     noise_sigma=args.noise, gt_sigma=args.gt_sigma, seed=args.seed)
    field, gt = synth_generate(spec)
    io.write_field(args.out, field)
    io.write_csv(Path(args.out) / io.GT_FILE, gt)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    kwargs = {"n_cases": args.cases, "seed": args.seed}
    if args.params is not None:
        kwargs["params"] = _load_params(args.params)
    report = run_gradcheck_suite(**kwargs)
    _emit(json.loads(report.to_json()), args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    report = masd(io.read_csv(args.pred), io.read_csv(args.gt), args.resolution)
    _emit(report.to_json(), args.out)
    return EXIT_OK


def cmd_losses(args) -> int:
    pred = io.read_csv(args.pred)
    gt = io.read_csv(args.gt)
    gdice = div = 0.0
    if args.field is not None:
        field = io.read_field(args.field)
        n, Z, W = field.shape
        weights = (gradient_weights(io.read_csv(args.image), args.alpha)
                   if args.image is not None else np.ones((Z, W)))
        g = np.stack([np.stack([gaussian_gt(gt[i, q], args.gt_sigma, Z) for q in range(W)],
                               axis=1) for i in range(n)])
        div = sum(weighted_divergence(field.surface_probs[i], g[i], weights) for i in range(n))
        classes = np.arange(n + 1)[:, None, None]
        pred_onehot = (field.region_labels[None] == classes).astype(float)
        gt_onehot = (region_labels_from_positions(gt, Z)[None] == classes).astype(float)
        gdice = generalized_dice(pred_onehot, gt_onehot)
    report = total_loss(gdice, div, smooth_loss(pred, gt), l1_surface_loss(pred, gt), args.w)
    _emit(report.to_dict(), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="surfopt", description="Ordered multi-surface inference toolkit.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def solver_flags(p):
        p.add_argument("--params", help="SolverParams as a JSON file or inline JSON")

    p = sub.add_parser("solve", help="solve column problems from JSON")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out")
    solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("infer", help="surface positions from probability-map CSVs")
    p.add_argument("--in", dest="inp", required=True, help="directory of surface_i.csv + labels.csv")
    p.add_argument("--out", required=True)
    p.add_argument("--kappa", type=float, default=FusionParams().kappa)
    p.add_argument("--delta", help="minimum gaps, comma list or one value")
    p.add_argument("--Delta", help="maximum gaps, comma list or one value (inf allowed)")
    p.add_argument("--workers", type=int)
    solver_flags(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("synth", help="write a synthetic fixture directory")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--N", type=int, default=3)
    p.add_argument("--Z", type=int, default=64)
    p.add_argument("--W", type=int, default=32)
    p.add_argument("--amplitude", type=float, default=SynthSpec.amplitude)
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--gt-sigma", type=float, default=8.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gradcheck", help="analytic vs finite-difference gradient audit")
    p.add_argument("--cases", type=int, default=500)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out")
    solver_flags(p)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("eval", help="MASD and ordering violations")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--resolution", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("losses", help="itemized training losses")
    p.add_argument("--pred", required=True, help="predicted surfaces CSV (N x W)")
    p.add_argument("--gt", required=True, help="ground-truth surfaces CSV (N x W)")
    p.add_argument("--field", help="probability-map directory for the Div and GDice terms")
    p.add_argument("--image", help="image CSV for gradient weights")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--gt-sigma", type=float, default=8.0)
    p.add_argument("--w", type=float, default=DEFAULT_L1_WEIGHT)
    p.add_argument("--out")
    p.set_defaults(func=cmd_losses)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"surfopt: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if getattr(args, "func", None) is None:
        parser.print_help(sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"surfopt: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
