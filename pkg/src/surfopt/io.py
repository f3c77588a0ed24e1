"""Text file formats: CSV matrices and JSON problem/solution lists.

CSV numbers are written with 17 significant digits so that a save/load
round trip reproduces every float64 exactly.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .column_model import ColumnProblem
from .surface_head import ProbabilityField

FLOAT_FMT = "%.17g"
LABELS_FILE = "labels.csv"
GT_FILE = "gt.csv"


def surface_file(i: int) -> str:
    return f"surface_{i}.csv"


def write_csv(path, matrix, integer: bool = False) -> None:
    arr = np.atleast_2d(np.asarray(matrix))
    fmt = "%d" if integer else FLOAT_FMT
    np.savetxt(path, arr, fmt=fmt, delimiter=",")


def read_csv(path, integer: bool = False) -> np.ndarray:
    arr = np.loadtxt(path, delimiter=",", dtype=int if integer else float, ndmin=2)
    return arr


def write_field(directory, field: ProbabilityField) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, probs in enumerate(field.surface_probs):
        write_csv(directory / surface_file(i), probs)
    write_csv(directory / LABELS_FILE, field.region_labels, integer=True)


def read_field(directory) -> ProbabilityField:
    """Load ``surface_0.csv, surface_1.csv, ...`` plus ``labels.csv`` from a directory."""
    directory = Path(directory)
    probs = []
    i = 0
    while (directory / surface_file(i)).exists():
        probs.append(read_csv(directory / surface_file(i)))
        i += 1
    if not probs:
        raise FileNotFoundError(f"no {surface_file(0)} in {directory}")
    labels = read_csv(directory / LABELS_FILE, integer=True)
    return ProbabilityField(np.stack(probs), labels)


def read_problems(path) -> list[ColumnProblem]:
    """Problems JSON: a single object, a list of objects, or ``{"problems": [...]}``."""
    obj = json.loads(Path(path).read_text())
    if isinstance(obj, dict) and "problems" in obj:
        obj = obj["problems"]
    if isinstance(obj, dict):
        obj = [obj]
    return [ColumnProblem.from_json(o) for o in obj]


def write_problems(path, problems) -> None:
    Path(path).write_text(json.dumps([p.to_json() for p in problems], indent=2))


def solution_to_json(sol) -> dict:
    return {
        "s": [float(v) for v in sol.s_star],
        "lambda": [float(v) for v in sol.full_lambda()],
        "iterations": int(sol.iterations),
        "residual_norm": float(sol.residual_norm),
        "converged": bool(sol.converged),
        "used_pseudo_inverse": bool(sol.used_pseudo_inverse),
    }
