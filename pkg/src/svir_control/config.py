"""Scenario configuration files.

A scenario is a YAML mapping with the optional sections ``model``,
``initial``, ``horizon``, ``cost``, ``solver`` and a ``strategy`` key.
Anything left out takes the baseline value below, so an empty file
describes the 240-day baseline scenario with quadratic social cost.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml

from .costs import FAMILIES, FAMILY_PARAMETER, CostSpec, SocialCost
from .errors import InvalidInputError
from .fbs import FbsConfig
from .model import ModelParams, SvirState, TimeGrid

DEFAULT_FAMILY_PARAM = {"quadratic": 0.02, "exponential": 0.06, "linear": 0.05}

SECTIONS = {
    "model": ("beta0", "alpha", "gamma", "gamma1", "mu", "eps", "u_bar"),
    "initial": ("S", "V", "I", "R"),
    "horizon": ("t0", "tf", "n_steps", "h"),
    "cost": ("family", "param", "c1", "c2"),
    "solver": ("max_iters", "relaxation", "rel_tol", "patience", "min_relaxation"),
}
TOP_LEVEL = set(SECTIONS) | {"strategy", "name"}
STRATEGIES = ("none", "full", "constant", "optimal")


class ConfigError(InvalidInputError):
    """Invalid scenario file; ``path`` is the dotted location of the bad field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class Strategy:
    kind: str
    value: Optional[float] = None

    def label(self) -> str:
        return f"constant({self.value:g})" if self.kind == "constant" else self.kind


@dataclass(frozen=True)
class ScenarioConfig:
    params: ModelParams = field(default_factory=ModelParams)
    x0: SvirState = field(default_factory=lambda: SvirState(0.85, 0.0, 0.15, 0.0))
    grid: TimeGrid = field(default_factory=lambda: TimeGrid(0.0, 240.0, 2400))
    cost: CostSpec = field(default_factory=lambda: CostSpec(SocialCost.quadratic(0.02)))
    solver: FbsConfig = field(default_factory=FbsConfig)
    strategy: Optional[Strategy] = None  # None: decided by the command
    name: str = "scenario"

    def echo(self) -> Dict[str, Any]:
        """Plain-data view of the resolved scenario, for reports."""
        s = self.solver
        return {
            "name": self.name,
            "model": asdict(self.params),
            "initial": asdict(self.x0),
            "horizon": {"t0": self.grid.t0, "tf": self.grid.tf, "n_steps": self.grid.n_steps},
            "cost": {"family": self.cost.social.family, "param": self.cost.social.param,
                     "c1": self.cost.c1, "c2": self.cost.c2},
            "solver": {"max_iters": s.max_iters, "relaxation": s.relaxation,
                       "rel_tol": s.rel_tol, "patience": s.patience,
                       "min_relaxation": s.min_relaxation},
            "strategy": None if self.strategy is None else self.strategy.label(),
        }


def _number(path: str, value, integer: bool = False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(path, f"must be finite, got {value!r}")
    if integer:
        if int(value) != value:
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return int(value)
    return float(value)


def _section(raw: dict, name: str) -> dict:
    sec = raw.get(name) or {}
    if not isinstance(sec, dict):
        raise ConfigError(name, "expected a mapping")
    for key in sec:
        if key not in SECTIONS[name]:
            raise ConfigError(f"{name}.{key}", f"unknown key (allowed: {', '.join(SECTIONS[name])})")
    return sec


def parse_strategy(value) -> Optional[Strategy]:
    """Accepts ``none``, ``full``, ``optimal``, ``constant:0.3`` or ``{constant: 0.3}``."""
    if value is None:
        return None
    if isinstance(value, dict):
        if set(value) != {"constant"}:
            raise ConfigError("strategy", f"mapping form must be {{constant: u}}, got {value!r}")
        return Strategy("constant", _number("strategy.constant", value["constant"]))
    if isinstance(value, str):
        text = value.strip().lower()
        if text.startswith("constant"):
            inner = text[len("constant"):].strip(" :()")
            try:
                return Strategy("constant", float(inner))
            except ValueError:
                raise ConfigError("strategy", f"cannot read the constant control in {value!r}") from None
        if text in ("none", "full", "optimal"):
            return Strategy(text)
    raise ConfigError("strategy", f"unknown strategy {value!r}; expected one of {', '.join(STRATEGIES)}")


def _build(path: str, factory, **kwargs):
    try:
        return factory(**kwargs)
    except InvalidInputError as exc:
        raise ConfigError(path, str(exc)) from None


def parse_config(raw: Optional[dict]) -> ScenarioConfig:
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "scenario file must contain a mapping")
    for key in raw:
        if key not in TOP_LEVEL:
            raise ConfigError(str(key), f"unknown section (allowed: {', '.join(sorted(TOP_LEVEL))})")

    m = _section(raw, "model")
    vals = {k: _number(f"model.{k}", v) for k, v in m.items()}
    for k in ("beta0", "gamma"):
        if k in vals and vals[k] <= 0:
            raise ConfigError(f"model.{k}", f"rate must be positive, got {vals[k]}")
    for k in ("alpha", "gamma1", "mu"):
        if k in vals and vals[k] < 0:
            raise ConfigError(f"model.{k}", f"rate must be non-negative, got {vals[k]}")
    if "u_bar" in vals and not 0 <= vals["u_bar"] <= 1:
        raise ConfigError("model.u_bar", f"maximum control must lie in [0, 1], got {vals['u_bar']}")
    params = _build("model", ModelParams, **vals)

    ini = _section(raw, "initial")
    x = {k: _number(f"initial.{k}", v) for k, v in ini.items()}
    for k, v in x.items():
        if v < 0:
            raise ConfigError(f"initial.{k}", f"compartment fraction must be >= 0, got {v}")
    S, V, I = x.get("S", 0.85), x.get("V", 0.0), x.get("I", 0.15)
    R = x.get("R", max(0.0, round(1.0 - S - V - I, 15)))  # complement, float dust removed
    x0 = _build("initial", SvirState, S=S, V=V, I=I, R=R)

    hz = _section(raw, "horizon")
    t0 = _number("horizon.t0", hz.get("t0", 0.0))
    tf = _number("horizon.tf", hz.get("tf", 240.0))
    if tf <= t0:
        raise ConfigError("horizon.tf", f"final time must exceed t0 (t0={t0}, tf={tf})")
    if "n_steps" in hz and "h" in hz:
        raise ConfigError("horizon", "give either n_steps or h, not both")
    if "n_steps" in hz:
        n = _number("horizon.n_steps", hz["n_steps"], integer=True)
        if n < 1:
            raise ConfigError("horizon.n_steps", f"must be >= 1, got {n}")
        grid = TimeGrid(t0, tf, n)
    else:
        h = _number("horizon.h", hz.get("h", 0.1))
        if h <= 0:
            raise ConfigError("horizon.h", f"step must be positive, got {h}")
        grid = TimeGrid.from_step(t0, tf, h)

    cs = _section(raw, "cost")
    family = cs.get("family", "quadratic")
    if family not in FAMILIES:
        raise ConfigError("cost.family", f"unknown cost family {family!r} (expected one of {', '.join(FAMILIES)})")
    param = _number("cost.param", cs.get("param", DEFAULT_FAMILY_PARAM[family]))
    if param <= 0:
        raise ConfigError("cost.param", f"{FAMILY_PARAMETER[family]} must be positive, got {param}")
    c1 = _number("cost.c1", cs.get("c1", 1.0))
    c2 = _number("cost.c2", cs.get("c2", 0.02))
    for k, v in (("c1", c1), ("c2", c2)):
        if v < 0:
            raise ConfigError(f"cost.{k}", f"cost weight must be >= 0, got {v}")
    cost = CostSpec(SocialCost(family, param), c1, c2)

    sv = _section(raw, "solver")
    skw = {}
    for k, v in sv.items():
        skw[k] = _number(f"solver.{k}", v, integer=k in ("max_iters", "patience"))
    if "relaxation" in skw and "min_relaxation" not in skw:
        skw["min_relaxation"] = min(FbsConfig.min_relaxation, skw["relaxation"])
    solver = _build("solver", FbsConfig, grid=grid, **skw)

    strategy = parse_strategy(raw.get("strategy"))
    if strategy is not None and strategy.kind == "constant" and not 0 <= strategy.value <= params.u_bar:
        raise ConfigError("strategy", f"constant control must lie in [0, {params.u_bar}], got {strategy.value}")

    name = str(raw.get("name", "scenario"))
    return ScenarioConfig(params, x0, grid, cost, solver, strategy, name)


def load_config(path: Union[str, Path, None]) -> ScenarioConfig:
    if path is None:
        return parse_config({})
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(str(path), f"invalid YAML: {exc}") from None
    return parse_config(raw)
