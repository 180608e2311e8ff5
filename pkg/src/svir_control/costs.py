"""Social-cost families, running cost and the decomposed cost functional."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .model import ModelParams, StateLike, TimeGrid, as_state_array

FAMILIES = ("quadratic", "exponential", "linear")
# name of the family parameter, as used in configs and sweeps
FAMILY_PARAMETER = {"quadratic": "b", "exponential": "k", "linear": "a"}


@dataclass(frozen=True)
class SocialCost:
    """``b u^2`` (quadratic), ``exp(k u) - 1`` (exponential) or ``a u`` (linear)."""

    family: str
    param: float

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidInputError(
                f"unknown cost family {self.family!r}; expected one of {', '.join(FAMILIES)}"
            )
        if not (math.isfinite(self.param) and self.param > 0):
            raise InvalidInputError(
                f"{FAMILY_PARAMETER[self.family]} must be a positive number, got {self.param!r}"
            )

    @classmethod
    def quadratic(cls, b: float) -> "SocialCost":
        return cls("quadratic", b)

    @classmethod
    def exponential(cls, k: float) -> "SocialCost":
        return cls("exponential", k)

    @classmethod
    def linear(cls, a: float) -> "SocialCost":
        return cls("linear", a)

    def __call__(self, u):
        return _social(self, u)

    def derivative(self, u):
        return _marginal(self, u)


@dataclass(frozen=True)
class CostSpec:
    social: SocialCost
    c1: float = 1.0
    c2: float = 0.02

    def __post_init__(self):
        for name in ("c1", "c2"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise InvalidInputError(f"{name} must be a non-negative number, got {value!r}")


@dataclass(frozen=True)
class CostBreakdown:
    j_social: float
    j_infection: float
    j_vaccination: float

    @property
    def j_total(self) -> float:
        return self.j_social + self.j_infection + self.j_vaccination

    @property
    def shares(self):
        """Fractions ``(social, infection, vaccination)`` of the total cost."""
        total = self.j_total
        if total <= 0:
            return (0.0, 0.0, 0.0)
        return (self.j_social / total, self.j_infection / total, self.j_vaccination / total)

    def as_dict(self) -> dict:
        s, i, v = self.shares
        return {
            "j_social": self.j_social,
            "j_infection": self.j_infection,
            "j_vaccination": self.j_vaccination,
            "j_total": self.j_total,
            "share_social": s,
            "share_infection": i,
            "share_vaccination": v,
        }


def _check_u(u):
    arr = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise InvalidInputError(f"control must lie in [0, 1], got {u!r}")
    return arr


def _social(spec: SocialCost, u):
    x = _check_u(u)
    if spec.family == "quadratic":
        out = spec.param * x * x
    elif spec.family == "exponential":
        out = np.expm1(spec.param * x)
    else:
        out = spec.param * x
    return float(out) if out.ndim == 0 else out


def _marginal(spec: SocialCost, u):
    x = _check_u(u)
    if spec.family == "quadratic":
        out = 2.0 * spec.param * x
    elif spec.family == "exponential":
        out = spec.param * np.exp(spec.param * x)
    else:
        out = np.full_like(x, spec.param)
    return float(out) if out.ndim == 0 else out


def social_cost(spec: SocialCost, u):
    """Social cost rate ``c(u)``; accepts scalars or arrays."""
    return _social(spec, u)


def marginal_social_cost(spec: SocialCost, u):
    """``c'(u)``."""
    return _marginal(spec, u)


def running_cost(state: StateLike, u: float, spec: CostSpec, alpha: float) -> float:
    """Integrand ``c(u) + c1 I + c2 alpha S`` of the cost functional."""
    x = as_state_array(state)
    return social_cost(spec.social, u) + spec.c1 * x[2] + spec.c2 * alpha * x[0]


def _trapezoid(y: np.ndarray, h: float) -> float:
    return float(h * (y.sum() - 0.5 * (y[0] + y[-1])))


def evaluate_costs(states, u_path, spec: CostSpec, p: ModelParams,
                   grid: TimeGrid) -> CostBreakdown:
    """Trapezoidal quadrature of the three cost terms on the grid nodes."""
    X = np.asarray(states, dtype=float)
    u = np.asarray(u_path, dtype=float)
    if X.ndim != 2 or X.shape[1] < 3 or X.shape[0] != grid.n_nodes:
        raise InvalidInputError(
            f"state trajectory shape {X.shape} does not match a grid of {grid.n_nodes} nodes"
        )
    if u.shape != (grid.n_nodes,):
        raise InvalidInputError(
            f"control path length {u.shape} does not match a grid of {grid.n_nodes} nodes"
        )
    h = grid.h
    return CostBreakdown(
        j_social=_trapezoid(np.asarray(social_cost(spec.social, u)), h),
        j_infection=_trapezoid(spec.c1 * X[:, 2], h),
        j_vaccination=_trapezoid(spec.c2 * p.alpha * X[:, 0], h),
    )
