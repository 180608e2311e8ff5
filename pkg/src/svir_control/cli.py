"""Command-line front end: ``svir-control <command> [options]``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure,
4 the forward-backward sweep did not converge (outputs are still written).
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .calibration import (
    THETA_NAMES, baseline_beta, estimate_constant_params, estimate_time_varying_sir,
    expost_control, read_series_csv,
)
from .config import ConfigError, ScenarioConfig, Strategy, load_config, parse_strategy
from .costs import FAMILY_PARAMETER
from .errors import InvalidInputError, NumericalError
from .fbs import evaluate_constant_policy, solve, sweep_parameter
from .model import reproduction_number
from .report import fmt, write_costates, write_json, write_table, write_trajectory

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_NONCONVERGED = 0, 2, 3, 4

log = logging.getLogger("svir_control")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _resolve_strategy(cfg: ScenarioConfig, override: Optional[str], default: str) -> Strategy:
    strategy = parse_strategy(override) if override is not None else cfg.strategy
    strategy = strategy or Strategy(default)
    if strategy.kind == "constant" and not 0.0 <= strategy.value <= cfg.params.u_bar:
        raise ConfigError("strategy", f"constant control must lie in [0, {cfg.params.u_bar}], "
                                      f"got {strategy.value}")
    return strategy


def _cost_payload(cost) -> dict:
    pct = [100.0 * x for x in cost.shares]
    return {**cost.as_dict(), "shares_percent": dict(zip(("social", "infection", "vaccination"), pct))}


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    strategy = _resolve_strategy(cfg, args.strategy, "none")
    if strategy.kind == "optimal":
        raise ConfigError("strategy", "simulate runs none, full or constant(u); use optimize for optimal")
    u = {"none": 0.0, "full": cfg.params.u_bar}.get(strategy.kind, strategy.value)
    sol = evaluate_constant_policy(cfg.params, cfg.x0, cfg.cost, cfg.grid, u)
    out = _out_dir(args)
    write_trajectory(out / "trajectory.csv", sol.times, sol.states, sol.control)
    write_json(out / "report.json", {
        "command": "simulate",
        "scenario": {**cfg.echo(), "strategy": strategy.label()},
        "R0": reproduction_number(cfg.params),
        "cost": _cost_payload(sol.cost),
        "files": {"trajectory": "trajectory.csv"},
    })
    print(f"j_total={fmt(sol.cost.j_total)}")
    return EXIT_OK


def cmd_optimize(args) -> int:
    cfg = load_config(args.config)
    strategy = _resolve_strategy(cfg, None, "optimal")
    if strategy.kind != "optimal":
        raise ConfigError("strategy", f"optimize needs strategy optimal, got {strategy.label()}")
    sol = solve(cfg.params, cfg.x0, cfg.cost, cfg.solver)
    out = _out_dir(args)
    write_trajectory(out / "trajectory.csv", sol.times, sol.states, sol.control)
    write_costates(out / "costates.csv", sol.times, sol.costates)
    costs = _cost_payload(sol.cost)
    write_json(out / "costs.json", costs)
    write_json(out / "report.json", {
        "command": "optimize",
        "scenario": {**cfg.echo(), "strategy": "optimal"},
        "R0": reproduction_number(cfg.params),
        "cost": costs,
        "convergence": {"converged": sol.converged, "iterations": sol.iterations,
                        "final_rel_change": sol.final_rel_change,
                        "final_relaxation": sol.final_relaxation},
        "files": {"trajectory": "trajectory.csv", "costates": "costates.csv",
                  "costs": "costs.json"},
    })
    print(f"j_total={fmt(sol.cost.j_total)} converged={sol.converged} iterations={sol.iterations}")
    if not sol.converged:
        print("error: forward-backward sweep did not converge", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def _parse_values(text: str) -> List[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InvalidInputError(f"--values: cannot parse {text!r} as comma-separated numbers") from None
    if not vals or any(not (math.isfinite(v) and v > 0) for v in vals):
        raise InvalidInputError(f"--values: need positive finite numbers, got {text!r}")
    return vals


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    family = cfg.cost.social.family
    expected = FAMILY_PARAMETER[family]
    if args.param != expected:
        raise InvalidInputError(f"--param {args.param!r} does not match the {family} cost "
                                f"family, whose parameter is {expected!r}")
    values = _parse_values(args.values)
    res = sweep_parameter(cfg.params, cfg.x0, cfg.cost, cfg.solver, values, workers=args.workers)
    out = _out_dir(args)

    def cell(v):
        return "" if v is None else float(v)

    write_table(out / "sweep.csv", ["param", "J_none", "J_full", "J_opt", "converged", "error"],
                ([r.param, cell(r.j_none), cell(r.j_full), cell(r.j_opt),
                  "" if r.converged is None else str(r.converged).lower(), r.error or ""]
                 for r in res.rows))
    long_rows = []
    for r in res.rows:
        for strategy, v in (("none", r.j_none), ("full", r.j_full), ("optimal", r.j_opt)):
            if v is not None:
                long_rows.append([r.param, strategy, float(v)])
    write_table(out / "sweep_long.csv", ["param", "strategy", "J"], long_rows)
    n_ok = sum(r.ok for r in res.rows)
    write_json(out / "report.json", {
        "command": "sweep",
        "scenario": cfg.echo(),
        "param": expected,
        "rows_ok": n_ok,
        "rows_failed": len(res.rows) - n_ok,
        "all_converged": all(r.converged for r in res.rows if r.ok),
        "files": {"sweep": "sweep.csv", "long": "sweep_long.csv"},
    })
    for r in res.rows:
        if not r.ok:
            print(f"warning: {expected}={fmt(r.param)} failed: {r.error}", file=sys.stderr)
    return EXIT_OK if n_ok else EXIT_NUMERICAL


def cmd_calibrate(args) -> int:
    series = read_series_csv(args.data, args.population)
    out = _out_dir(args)
    if args.mode == "constant":
        est = estimate_constant_params(series, args.mu, args.eps)
        write_json(out / "calibration.json", {
            "mode": "constant", "mu": args.mu, "eps": args.eps, "n_obs": len(series),
            **est.as_dict(),
        })
        print(" ".join(f"{k}={fmt(v)}" for k, v in zip(THETA_NAMES, est.theta)))
        return EXIT_OK
    daily = estimate_time_varying_sir(series, args.mu)
    labels = series.labels or [str(d) for d in series.dates]
    write_table(out / "daily.csv", ["date", "beta", "gamma", "missing"],
                ([labels[n], "" if not ok else float(b), "" if not ok else float(g), int(not ok)]
                 for n, (b, g, ok) in enumerate(zip(daily.beta, daily.gamma, daily.valid))))
    write_json(out / "calibration.json", {
        "mode": "daily", "mu": args.mu, "n_obs": len(series),
        "n_days": int(len(daily.beta)), "n_missing": int(np.sum(~daily.valid)),
        "files": {"daily": "daily.csv"},
    })
    return EXIT_OK


def _parse_window(text: str):
    try:
        a, b = text.split(":")
        return int(a), int(b)
    except ValueError:
        raise InvalidInputError(f"--baseline-window must look like start:end, got {text!r}") from None


def _read_annotations(path, series) -> List[str]:
    """Phase label per series row from a ``start,end,label`` file (inclusive dates)."""
    from .calibration import _parse_date

    phases = [""] * len(series)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header != ["start", "end", "label"]:
            raise InvalidInputError(f"{path}: header must be start,end,label")
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != 3:
                raise InvalidInputError(f"{path}: line {lineno}: expected 3 fields")
            try:
                lo, hi = _parse_date(rec[0]), _parse_date(rec[1])
            except InvalidInputError as exc:
                raise InvalidInputError(f"{path}: line {lineno}: {exc}") from None
            for n, d in enumerate(series.dates):
                if lo <= d <= hi:
                    phases[n] = rec[2].strip()
    return phases


def cmd_expost(args) -> int:
    series = read_series_csv(args.data, args.population)
    start, stop = _parse_window(args.baseline_window)
    beta0 = baseline_beta(series, args.mu, start, stop)
    daily = estimate_time_varying_sir(series, args.mu)
    u_hat, clamped = expost_control(daily.beta, beta0)
    labels = series.labels or [str(d) for d in series.dates]
    header = ["date", "beta_hat", "u_hat", "clamped_flag"]
    phases = None
    if args.annotations:
        phases = _read_annotations(args.annotations, series)
        header.append("phase")
    rows = []
    for n, (b, u, c) in enumerate(zip(daily.beta, u_hat, clamped)):
        row = [labels[n], "" if np.isnan(b) else float(b), "" if np.isnan(u) else float(u), int(c)]
        if phases is not None:
            row.append(phases[n])
        rows.append(row)
    out = _out_dir(args)
    write_table(out / "expost.csv", header, rows)
    write_json(out / "report.json", {
        "command": "expost", "beta0": beta0, "baseline_window": [start, stop],
        "mu": args.mu, "n_days": len(rows), "n_clamped": int(np.sum(clamped)),
        "files": {"expost": "expost.csv"},
    })
    print(f"beta0={fmt(beta0)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="svir-control",
                                     description="Optimal social-distancing control for the SVIR model.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="scenario YAML (defaults to the baseline scenario)")
        p.add_argument("--out", default=".", help="output directory")
        return p

    p = scenario("simulate", "forward run under none, full or constant control")
    p.add_argument("--strategy", help="none | full | constant:U (overrides the config)")
    p.set_defaults(func=cmd_simulate)

    p = scenario("optimize", "solve for the optimal control")
    p.set_defaults(func=cmd_optimize)

    p = scenario("sweep", "costs over a list of social-cost parameters")
    p.add_argument("--param", required=True, choices=sorted(FAMILY_PARAMETER.values()))
    p.add_argument("--values", required=True, help="comma-separated list, e.g. 0.005,0.02,0.1")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    def data_cmd(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--data", required=True, help="CSV with date,S,V,I,R (or *_count columns)")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--population", type=int, help="population size for count columns")
        p.add_argument("--mu", type=float, default=0.0)
        return p

    p = data_cmd("calibrate", "estimate rates from an observed series")
    p.add_argument("--eps", type=float, default=0.078)
    p.add_argument("--mode", choices=("constant", "daily"), default="constant")
    p.set_defaults(func=cmd_calibrate)

    p = data_cmd("expost", "reconstruct the realised control from an observed series")
    p.add_argument("--baseline-window", default="0:21", help="rows start:end used for beta0")
    p.add_argument("--annotations", help="optional CSV start,end,label adding a phase column")
    p.set_defaults(func=cmd_expost)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InvalidInputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
