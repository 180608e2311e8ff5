"""Hamiltonian, costate dynamics and the pointwise optimal-control maps.

Costates are ordered ``(lambda1, lambda2, lambda3)`` and price ``S``, ``V``
and ``I``.  ``R`` never enters the cost, so it has no costate.

All control maps accept scalars or equally-shaped arrays for the state and
costate components, which is how the sweep solver evaluates them on a whole
grid at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .costs import CostSpec, social_cost
from .errors import InstabilityError, InvalidInputError
from .model import ModelParams, StateLike, TimeGrid, as_state_array, control_path

TOL_SWITCH = 1e-6
TOL_SING = 1e-10


@dataclass(frozen=True)
class CostateState:
    lambda1: float
    lambda2: float
    lambda3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.lambda1, self.lambda2, self.lambda3], dtype=float)


@dataclass(frozen=True)
class SwitchingDiagnostics:
    phi: float
    a1: float
    a2: float
    regime: str  # "upper", "singular" or "lower"


def _costate_array(costate) -> np.ndarray:
    if isinstance(costate, CostateState):
        return costate.as_array()
    lam = np.asarray(costate, dtype=float)
    if lam.shape != (3,) or not np.all(np.isfinite(lam)):
        raise InvalidInputError(f"costate must be 3 finite numbers, got {costate!r}")
    return lam


def _check_u(u):
    if not (math.isfinite(u) and 0.0 <= u <= 1.0):
        raise InvalidInputError(f"control must lie in [0, 1], got {u!r}")


def _gap(S, V, l1, l2, l3, eps):
    # marginal cost of infecting one more susceptible/vaccinee, weighted by exposure
    return S * (l3 - l1) + eps * V * (l3 - l2)


def hamiltonian(state: StateLike, costate, u: float, p: ModelParams, spec: CostSpec) -> float:
    _check_u(u)
    x = as_state_array(state)
    l1, l2, l3 = _costate_array(costate)
    dS, dV, dI, _ = _kernels.svir_rhs(*x, float(u), *p.rates())
    S, I = x[0], x[2]
    return (social_cost(spec.social, u) + spec.c1 * I + spec.c2 * p.alpha * S
            + l1 * dS + l2 * dV + l3 * dI)


def costate_rhs(state: StateLike, costate, u: float, p: ModelParams,
                spec: CostSpec) -> np.ndarray:
    """``d(lambda)/dt = -dH/d(S, V, I)``."""
    _check_u(u)
    x = as_state_array(state)
    lam = _costate_array(costate)
    return np.array(_kernels.costate_rhs(x[0], x[1], x[2], *lam, float(u), *p.rates(),
                                         spec.c1, spec.c2))


def integrate_backward(states, u_path, p: ModelParams, spec: CostSpec,
                       grid: TimeGrid) -> np.ndarray:
    """RK4 for the costates backwards from ``lambda(tf) = 0``.

    Returns an ``(n_steps + 1, 3)`` array aligned with ``grid``.
    """
    X = np.ascontiguousarray(states, dtype=float)
    if X.shape != (grid.n_nodes, 4):
        raise InvalidInputError(
            f"state trajectory shape {X.shape} does not match {grid.n_nodes} grid nodes"
        )
    u = control_path(u_path, grid, 1.0)
    L, bad = _kernels.rk4_backward(X, u, grid.h, *p.rates(), spec.c1, spec.c2)
    if bad >= 0:
        raise InstabilityError(f"costate integration produced non-finite values at step {bad}",
                               step=int(bad))
    return L


def _split(state, costate):
    if isinstance(state, np.ndarray) and state.ndim == 2:
        S, V, I = state[:, 0], state[:, 1], state[:, 2]
    else:
        x = as_state_array(state)
        S, V, I = x[0], x[1], x[2]
    if isinstance(costate, np.ndarray) and costate.ndim == 2:
        l1, l2, l3 = costate[:, 0], costate[:, 1], costate[:, 2]
    else:
        l1, l2, l3 = _costate_array(costate)
    return S, V, I, l1, l2, l3


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def optimal_control_quadratic(state, costate, p: ModelParams, b: float):
    """Minimiser of ``H`` over ``[0, u_bar]`` for ``c(u) = b u^2``."""
    if not b > 0:
        raise InvalidInputError(f"b must be positive, got {b}")
    S, V, I, l1, l2, l3 = _split(state, costate)
    raw = p.beta0 * I * _gap(S, V, l1, l2, l3, p.eps) / (2.0 * b)
    return _scalar_or_array(np.clip(raw, 0.0, p.u_bar))


def optimal_control_exponential(state, costate, p: ModelParams, k: float):
    """Minimiser of ``H`` over ``[0, u_bar]`` for ``c(u) = exp(k u) - 1``.

    Zero wherever ``beta0 I K <= 0`` (``K`` the exposure-weighted costate gap),
    since then ``H`` is increasing in ``u``.
    """
    if not k > 0:
        raise InvalidInputError(f"k must be positive, got {k}")
    S, V, I, l1, l2, l3 = _split(state, costate)
    z = np.asarray(p.beta0 * I * _gap(S, V, l1, l2, l3, p.eps) / k, dtype=float)
    out = np.zeros_like(z)
    pos = z > 0
    out[pos] = np.clip(np.log(z[pos]) / k, 0.0, p.u_bar)
    return _scalar_or_array(out)


def unclamped_exponential_control(state, costate, p: ModelParams, k: float):
    """``log(beta0 I K / k) / k`` before clamping; ``-inf`` where undefined."""
    S, V, I, l1, l2, l3 = _split(state, costate)
    z = np.asarray(p.beta0 * I * _gap(S, V, l1, l2, l3, p.eps) / k, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(z > 0, np.log(np.where(z > 0, z, 1.0)) / k, -np.inf)
    return _scalar_or_array(out)


def switching_function(state, costate, p: ModelParams, a: float):
    """``dH/du`` for the linear social cost ``c(u) = a u``."""
    S, V, I, l1, l2, l3 = _split(state, costate)
    return _scalar_or_array(a - p.beta0 * I * _gap(S, V, l1, l2, l3, p.eps))


def _rate_parts(S, V, I, l1, l2, l3, p: ModelParams, c1, c2):
    """Exact first time-derivative of the switching function divided by beta0.

    Returns the value together with its gradient with respect to
    ``(S, V, I, l1, l2, l3)``.
    """
    al, g, g1, mu, eps = p.alpha, p.gamma, p.gamma1, p.mu, p.eps
    P = (-(g + mu) * l1 + (al + mu) * l3 - al * l2 + c1 - al * c2
         + eps * al * (l2 - l3))
    Q = -(g + mu) * l2 + (g1 + mu) * l3 + c1
    value = S * I * P + mu * (l1 - l3) * I + eps * V * I * Q
    grad = (
        I * P,
        eps * I * Q,
        S * P + mu * (l1 - l3) + eps * V * Q,
        -(g + mu) * S * I + mu * I,
        (eps - 1.0) * al * S * I - eps * (g + mu) * V * I,
        (al + mu - eps * al) * S * I - mu * I + eps * (g1 + mu) * V * I,
    )
    return value, grad


def switching_rate(state, costate, p: ModelParams, spec: CostSpec):
    """``d/dt (dH/du)`` along the state/costate flow; independent of ``u``."""
    S, V, I, l1, l2, l3 = _split(state, costate)
    value, _ = _rate_parts(S, V, I, l1, l2, l3, p, spec.c1, spec.c2)
    return _scalar_or_array(p.beta0 * value)


def _singular_parts(S, V, I, l1, l2, l3, p: ModelParams, c1, c2):
    _, grad = _rate_parts(S, V, I, l1, l2, l3, p, c1, c2)
    al, g, g1, mu, eps = p.alpha, p.gamma, p.gamma1, p.mu, p.eps

    def flow(u):
        b = p.beta0 * (1.0 - u)
        return (
            -b * S * I - al * S + mu - mu * S,
            al * S - eps * b * V * I - g1 * V - mu * V,
            b * S * I + eps * b * V * I - g * I - mu * I,
            (b * I + al + mu) * l1 - al * l2 - b * I * l3 - c2 * al,
            (eps * b * I + g1 + mu) * l2 - eps * b * I * l3,
            b * S * l1 + eps * b * V * l2 - (b * S + eps * b * V - g - mu) * l3 - c1,
        )

    f0, f1 = flow(0.0), flow(1.0)
    drift = sum(gi * fi for gi, fi in zip(grad, f0))
    slope = sum(gi * (fa - fb) for gi, fa, fb in zip(grad, f1, f0))
    return p.beta0 * slope, -p.beta0 * drift


def singular_control_coefficients(state, costate, p: ModelParams, spec: CostSpec):
    """``(A1, A2)`` with ``d^2/dt^2 (dH/du) = A1 u - A2`` for the linear family.

    The second derivative is the gradient of :func:`switching_rate` applied
    to the joint state/costate vector field, which is affine in ``u``; both
    coefficients carry an overall factor ``I``.
    """
    S, V, I, l1, l2, l3 = _split(state, costate)
    a1, a2 = _singular_parts(S, V, I, l1, l2, l3, p, spec.c1, spec.c2)
    return _scalar_or_array(a1), _scalar_or_array(a2)


def switching_rate_expanded(state, costate, p: ModelParams, spec: CostSpec):
    """Collected-term closed form of ``d/dt (dH/du) / beta0`` as commonly quoted.

    Lacks the ``eps * alpha * S * I * (lambda2 - lambda3)`` contribution of
    the vaccinee inflow, so it agrees with :func:`switching_rate` only when
    ``alpha * eps == 0``.
    """
    S, V, I, l1, l2, l3 = _split(state, costate)
    al, g, g1, mu, e = p.alpha, p.gamma, p.gamma1, p.mu, p.eps
    c1, c2 = spec.c1, spec.c2
    out = ((-(g + mu) * l1 + (al + mu) * l3 - al * l2 + (c1 - al * c2)) * S * I
           + mu * (l1 - l3) * I
           + e * (-(g + mu) * l2 + (g1 + mu) * l3 + c1) * V * I)
    return _scalar_or_array(out)


def singular_coefficients_expanded(state, costate, p: ModelParams, spec: CostSpec):
    """Fully expanded polynomial pair ``(A1, A2)`` transcribed term by term.

    Kept for auditing only; the solver uses
    :func:`singular_control_coefficients`.  Relative to the exact pair this
    transcription (i) differentiates :func:`switching_rate_expanded`,
    (ii) is scaled by ``1 / beta0``, (iii) exchanges the roles of the two
    coefficients (``A2`` multiplies ``u``) and (iv) contains the product
    ``2 eps mu lambda1 lambda3 V`` where ``2 eps mu gamma1 lambda3 V`` is
    required.  The test-suite pins each of these differences down.
    """
    S, V, I, l1, l2, l3 = _split(state, costate)
    al, g, g1, mu, e, b = p.alpha, p.gamma, p.gamma1, p.mu, p.eps, p.beta0
    c1, c2 = spec.c1, spec.c2
    A1 = I * (
        -al * l1 * mu + 2 * al * l2 * mu - al * l3 * mu + 2 * g * l1 * mu
        + c1 * (S * (-al * (e - 2) + g + b * I + 3 * mu - 2 * b * e * V)
                + e * V * (g + 2 * g1 + b * e * I + 3 * mu) - 2 * mu - b * S ** 2
                - b * e ** 2 * V ** 2)
        + al * c2 * (-S * (al + 2 * g + b * I + 3 * mu - b * e * V) + 2 * mu + b * S ** 2)
        - b * I * l1 * mu + b * I * l3 * mu + al * b * e * I * l2 * S - al * b * e * I * l3 * S
        - al * b * I * l2 * S + al * b * I * l3 * S - b * g * I * l3 * S
        - b * g * e ** 2 * I * l3 * V + b * g1 * e ** 2 * I * l3 * V + l1 * mu ** 2 - l3 * mu ** 2
        - al * b * l1 * S ** 2 + al * b * l2 * S ** 2 + b * g * l1 * S ** 2 - al ** 2 * l2 * S
        + al ** 2 * l3 * S
        + al * g * e * l2 * S - 2 * al * g * l2 * S - al * g1 * e * l3 * S + al * g1 * l2 * S
        + al * e * l2 * mu * S - al * e * l3 * mu * S
        - 2 * al * l2 * mu * S + 2 * al * l3 * mu * S - g ** 2 * l1 * S - 2 * g * l1 * mu * S
        - l1 * mu ** 2 * S + l3 * mu ** 2 * S + b * g * e * l1 * S * V + b * g * e * l2 * S * V
        - b * g1 * e * l1 * S * V + b * g * e ** 2 * l2 * V ** 2 - b * g1 * e ** 2 * l2 * V ** 2
        - b * e * l1 * mu * V - g ** 2 * e * l2 * V
        - 2 * g * e * l2 * mu * V + g1 ** 2 * e * l3 * V + 2 * l1 * e * l3 * mu * V
        - e * l2 * mu ** 2 * V + e * l3 * mu ** 2 * V + e * b * l2 * mu * V
    )
    A2 = I * (
        b * c1 * (I * (S + e ** 2 * V) - (S + e * V) ** 2) + al * b * c2 * S * (-I + S + e * V)
        - b * I * l1 * mu + b * I * l3 * mu + al * b * e * I * l2 * S
        - al * b * e * I * l3 * S - al * b * I * l2 * S + al * b * I * l3 * S - b * g * I * l3 * S
        - b * g * e ** 2 * I * l3 * V + b * g1 * e ** 2 * I * l3 * V
        - al * b * l1 * S ** 2 + al * b * l2 * S ** 2 + b * g * l1 * S ** 2 + b * g * e * l1 * S * V
        + b * g * e * l2 * S * V - b * g1 * e * l1 * S * V
        + b * g * e ** 2 * l2 * V ** 2 - b * g1 * e ** 2 * l2 * V ** 2 - b * e * l1 * mu * V
        + e * b * l2 * mu * V
    )
    return _scalar_or_array(A1), _scalar_or_array(A2)


def _linear_map(S, V, I, l1, l2, l3, p: ModelParams, spec: CostSpec, previous,
                tol_switch, tol_sing):
    phi = np.asarray(spec.social.param - p.beta0 * I * _gap(S, V, l1, l2, l3, p.eps), dtype=float)
    a1, a2 = _singular_parts(S, V, I, l1, l2, l3, p, spec.c1, spec.c2)
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    prev = np.broadcast_to(np.asarray(previous, dtype=float), phi.shape)
    u = np.where(phi < 0, p.u_bar, 0.0)
    band = np.abs(phi) <= tol_switch
    solvable = band & (np.abs(a1) > tol_sing)
    with np.errstate(divide="ignore", invalid="ignore"):
        sing = np.clip(np.where(solvable, a2 / np.where(solvable, a1, 1.0), 0.0), 0.0, p.u_bar)
    u = np.where(solvable, sing, u)
    u = np.where(band & ~solvable, prev, u)
    regime = np.where(band, "singular", np.where(phi < 0, "upper", "lower"))
    return u, phi, a1, a2, regime


def optimal_control_linear(state, costate, p: ModelParams, spec: CostSpec,
                           tol_switch: float = TOL_SWITCH, tol_sing: float = TOL_SING,
                           previous: float = 0.0):
    """Bang-bang/singular control for ``c(u) = a u``.

    Returns ``(u, SwitchingDiagnostics)``.  Inside the ``tol_switch`` band
    the singular value ``A2 / A1`` is used (clamped to ``[0, u_bar]``); when
    ``|A1| <= tol_sing`` the caller-supplied ``previous`` value is held.
    """
    if spec.social.family != "linear":
        raise InvalidInputError("optimal_control_linear needs a linear social cost")
    S, V, I, l1, l2, l3 = _split(state, costate)
    u, phi, a1, a2, regime = _linear_map(S, V, I, l1, l2, l3, p, spec, previous,
                                         tol_switch, tol_sing)
    diag = SwitchingDiagnostics(float(phi), float(a1), float(a2), str(regime))
    return float(u), diag


def control_map(states: np.ndarray, costates: np.ndarray, p: ModelParams, spec: CostSpec,
                previous: Optional[np.ndarray] = None,
                tol_switch: float = TOL_SWITCH, tol_sing: float = TOL_SING) -> np.ndarray:
    """Pointwise Hamiltonian minimiser on every grid node."""
    fam = spec.social.family
    if fam == "quadratic":
        return optimal_control_quadratic(states, costates, p, spec.social.param)
    if fam == "exponential":
        return optimal_control_exponential(states, costates, p, spec.social.param)
    if previous is None:
        previous = np.zeros(states.shape[0])
    S, V, I = states[:, 0], states[:, 1], states[:, 2]
    l1, l2, l3 = costates[:, 0], costates[:, 1], costates[:, 2]
    u, *_ = _linear_map(S, V, I, l1, l2, l3, p, spec, previous, tol_switch, tol_sing)
    return u
