"""SVIR dynamics: parameters, vector field, forward integration, equilibria.

State vectors are ordered ``(S, V, I, R)`` and hold population fractions.
Trajectories are ``(n_steps + 1, 4)`` float arrays aligned with a
:class:`TimeGrid`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import brentq

from . import _kernels
from .errors import DomainError, InstabilityError, InvalidInputError, NumericalError

TOL_STATE = 1e-9
TOL_EQ = 1e-8


@dataclass(frozen=True)
class ModelParams:
    """Epidemiological rates (per day) plus the control cap.

    ``eps`` scales transmission to vaccinees (``beta1 = eps * beta0``);
    ``u_bar`` is the largest admissible control value.
    """

    beta0: float = 0.22
    alpha: float = 0.004
    gamma: float = 0.095
    gamma1: float = 0.071
    mu: float = 0.0
    eps: float = 0.078
    u_bar: float = 1.0

    def __post_init__(self):
        for name in ("beta0", "alpha", "gamma", "gamma1", "mu", "eps", "u_bar"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidInputError(f"{name} must be finite, got {value!r}")
        if self.beta0 <= 0:
            raise InvalidInputError(f"beta0 must be > 0, got {self.beta0}")
        if self.gamma <= 0:
            raise InvalidInputError(f"gamma must be > 0, got {self.gamma}")
        for name in ("alpha", "gamma1", "mu"):
            if getattr(self, name) < 0:
                raise InvalidInputError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not 0.0 <= self.eps <= 1.0:
            raise InvalidInputError(f"eps must lie in [0, 1], got {self.eps}")
        if not 0.0 <= self.u_bar <= 1.0:
            raise InvalidInputError(f"u_bar must lie in [0, 1], got {self.u_bar}")

    @property
    def beta1(self) -> float:
        return self.eps * self.beta0

    def beta(self, u):
        """Controlled transmission rate ``beta0 * (1 - u)``."""
        return self.beta0 * (1.0 - u)

    def rates(self):
        return (self.beta0, self.alpha, self.gamma, self.gamma1, self.mu, self.eps)


@dataclass(frozen=True)
class SvirState:
    S: float
    V: float
    I: float
    R: float

    def __post_init__(self):
        for name, value in zip("SVIR", self.as_tuple()):
            if not math.isfinite(value):
                raise InvalidInputError(f"state component {name} is not finite: {value!r}")

    def as_tuple(self):
        return (self.S, self.V, self.I, self.R)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=float)

    @classmethod
    def from_array(cls, x) -> "SvirState":
        x = np.asarray(x, dtype=float)
        if x.shape != (4,):
            raise InvalidInputError(f"expected 4 state components, got shape {x.shape}")
        return cls(*map(float, x))

    @property
    def total(self) -> float:
        return self.S + self.V + self.I + self.R


StateLike = Union[SvirState, Sequence[float], np.ndarray]


def as_state_array(state: StateLike) -> np.ndarray:
    if isinstance(state, SvirState):
        return state.as_array()
    x = np.asarray(state, dtype=float)
    if x.shape != (4,):
        raise InvalidInputError(f"expected 4 state components, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError(f"state has non-finite components: {x}")
    return x


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t0 = t_0 < ... < t_n = tf`` with ``n_steps`` intervals."""

    t0: float
    tf: float
    n_steps: int

    def __post_init__(self):
        if not (math.isfinite(self.t0) and math.isfinite(self.tf)):
            raise InvalidInputError("grid endpoints must be finite")
        if self.tf <= self.t0:
            raise InvalidInputError(f"tf must exceed t0 (t0={self.t0}, tf={self.tf})")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise InvalidInputError(f"n_steps must be a positive integer, got {self.n_steps}")

    @classmethod
    def from_step(cls, t0: float, tf: float, h: float = 0.1) -> "TimeGrid":
        if h <= 0:
            raise InvalidInputError(f"step must be positive, got {h}")
        return cls(t0, tf, max(1, int(round((tf - t0) / h))))

    @property
    def h(self) -> float:
        return (self.tf - self.t0) / self.n_steps

    @property
    def n_nodes(self) -> int:
        return self.n_steps + 1

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t0, self.tf, self.n_steps + 1)

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.t0, self.tf, self.n_steps * factor)


def control_path(values, grid: TimeGrid, u_bar: float = 1.0) -> np.ndarray:
    """Validate a per-node control sequence and return it as a float array.

    A scalar is broadcast to every node.
    """
    u = np.asarray(values, dtype=float)
    if u.ndim == 0:
        u = np.full(grid.n_nodes, float(u))
    if u.shape != (grid.n_nodes,):
        raise InvalidInputError(
            f"control path has {u.shape[0] if u.ndim == 1 else u.shape} values, "
            f"grid needs {grid.n_nodes}"
        )
    if not np.all(np.isfinite(u)):
        raise InvalidInputError("control path contains non-finite values")
    if u.min() < 0.0 or u.max() > u_bar:
        raise InvalidInputError(
            f"control values must lie in [0, {u_bar}], got range [{u.min()}, {u.max()}]"
        )
    return u


@dataclass(frozen=True)
class Equilibrium:
    kind: str  # "disease-free" or "endemic"
    state: SvirState


def controlled_rhs(state: StateLike, u: float, p: ModelParams) -> np.ndarray:
    """Time derivative ``(S', V', I', R')`` of the controlled SVIR system."""
    x = as_state_array(state)
    if not math.isfinite(u) or not 0.0 <= u <= 1.0:
        raise InvalidInputError(f"control must lie in [0, 1], got {u!r}")
    return np.array(_kernels.svir_rhs(*x, float(u), *p.rates()))


def integrate_forward(p: ModelParams, u_path, x0: StateLike, grid: TimeGrid) -> np.ndarray:
    """Classical RK4 on ``grid``; ``u_path[k]`` is held over ``[t_k, t_{k+1}]``.

    Raises :class:`InstabilityError` naming the first step that produces a
    component below ``-TOL_STATE`` or a non-finite value.
    """
    u = control_path(u_path, grid, 1.0)
    x = as_state_array(x0)
    X, bad = _kernels.rk4_forward(x, u, grid.h, *p.rates(), TOL_STATE)
    if bad >= 0:
        raise InstabilityError(
            f"forward integration became unstable at step {bad} "
            f"(t={grid.t0 + (bad + 1) * grid.h:g}); reduce the step size",
            step=int(bad),
        )
    return X


def _require_positive(**denoms):
    for name, value in denoms.items():
        if value <= 0:
            raise DomainError(f"degenerate denominator: {name} = {value}")


def reproduction_number(p: ModelParams) -> float:
    """Basic reproduction number of the vaccinated population."""
    mu, a, g, g1 = p.mu, p.alpha, p.gamma, p.gamma1
    _require_positive(**{"mu+alpha": mu + a, "mu+gamma": mu + g, "mu+gamma1": mu + g1})
    return (mu * p.beta0 / ((mu + a) * (mu + g))
            + a * mu * p.beta1 / ((mu + g1) * (mu + a) * (mu + g)))


def disease_free_equilibrium(p: ModelParams) -> Equilibrium:
    mu, a, g1 = p.mu, p.alpha, p.gamma1
    _require_positive(**{"mu+alpha": mu + a, "mu+gamma1": mu + g1})
    S = mu / (mu + a)
    V = a * mu / ((mu + g1) * (mu + a))
    return Equilibrium("disease-free", SvirState(S, V, 0.0, 1.0 - S - V))


def _equilibrium_sv(I, p: ModelParams):
    mu, a = p.mu, p.alpha
    S = mu / (mu + a + p.beta0 * I)
    V = a * mu / ((mu + a + p.beta0 * I) * (mu + p.gamma1 + p.beta1 * I))
    return S, V


def endemic_equilibrium(p: ModelParams) -> Optional[Equilibrium]:
    """Endemic steady state, or ``None`` when ``R0 <= 1``.

    ``I`` solves the infected balance ``beta0 S(I) + beta1 V(I) = gamma + mu``
    after substituting the steady-state ``S`` and ``V``; the root is bracketed
    on ``(0, 1]`` and refined with Brent's method.
    """
    if reproduction_number(p) <= 1.0:
        return None

    def balance(I):
        S, V = _equilibrium_sv(I, p)
        return p.beta0 * S + p.beta1 * V - (p.gamma + p.mu)

    lo, hi = 1e-300, 1.0
    if balance(lo) <= 0 or balance(hi) >= 0:
        raise NumericalError("endemic balance has no sign change on (0, 1]")
    try:
        I = brentq(balance, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    except (RuntimeError, ValueError) as exc:
        raise NumericalError(f"endemic root finding failed: {exc}") from exc
    S, V = _equilibrium_sv(I, p)
    return Equilibrium("endemic", SvirState(S, V, I, 1.0 - S - V - I))
