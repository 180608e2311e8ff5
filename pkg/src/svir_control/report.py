"""Serialisation of trajectories, costates and run reports."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .costs import CostBreakdown, CostSpec, evaluate_costs
from .errors import InvalidInputError
from .model import ModelParams, TimeGrid

SIG_DIGITS = 10


def fmt(x) -> str:
    return f"{float(x):.{SIG_DIGITS}g}"


def rounded(obj):
    """Recursively round floats to ``SIG_DIGITS`` significant digits."""
    if isinstance(obj, (float, np.floating)):
        return float(fmt(obj))
    if isinstance(obj, dict):
        return {k: rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [rounded(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return rounded(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, payload) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(rounded(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_table(path, header, rows) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_trajectory(path, times, states, control) -> None:
    write_table(path, ["t", "S", "V", "I", "R", "u"],
                (tuple(float(v) for v in (t, *x, u)) for t, x, u in zip(times, states, control)))


def write_costates(path, times, costates) -> None:
    write_table(path, ["t", "lambda1", "lambda2", "lambda3"],
                (tuple(float(v) for v in (t, *lam)) for t, lam in zip(times, costates)))


def read_trajectory(path):
    """Return ``(grid, states, control)`` from a ``t,S,V,I,R,u`` file."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 6 or data.shape[0] < 2:
        raise InvalidInputError(f"{path}: expected columns t,S,V,I,R,u and at least 2 rows")
    t = data[:, 0]
    grid = TimeGrid(float(t[0]), float(t[-1]), data.shape[0] - 1)
    return grid, data[:, 1:5], data[:, 5]


def recost_trajectory(path, spec: CostSpec, p: ModelParams) -> CostBreakdown:
    grid, X, u = read_trajectory(path)
    return evaluate_costs(X, u, spec, p, grid)
