"""Forward-backward sweep for the optimal social-distancing problem."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from .costs import FAMILY_PARAMETER, CostBreakdown, CostSpec, SocialCost, evaluate_costs
from .errors import InvalidInputError, NonConvergenceError, SvirError
from .model import ModelParams, StateLike, TimeGrid, as_state_array, control_path, integrate_forward
from .pmp import control_map, integrate_backward

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FbsConfig:
    """Sweep settings.

    ``relaxation`` is the initial weight of the new control map in
    ``u <- theta * u_map + (1 - theta) * u_old``.  When the change metric
    stops improving for ``patience`` consecutive sweeps the weight is halved,
    down to ``min_relaxation``.
    """

    grid: TimeGrid = field(default_factory=lambda: TimeGrid(0.0, 240.0, 2400))
    max_iters: int = 500
    relaxation: float = 0.5
    rel_tol: float = 1e-4
    initial_control: Optional[np.ndarray] = None
    patience: int = 3
    min_relaxation: float = 1e-4

    def __post_init__(self):
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise InvalidInputError(f"max_iters must be a positive integer, got {self.max_iters}")
        if not 0.0 < self.relaxation <= 1.0:
            raise InvalidInputError(f"relaxation must lie in (0, 1], got {self.relaxation}")
        if not (math.isfinite(self.rel_tol) and self.rel_tol > 0):
            raise InvalidInputError(f"rel_tol must be positive, got {self.rel_tol}")
        if int(self.patience) != self.patience or self.patience < 1:
            raise InvalidInputError(f"patience must be a positive integer, got {self.patience}")
        if not 0.0 < self.min_relaxation <= self.relaxation:
            raise InvalidInputError("min_relaxation must lie in (0, relaxation]")


@dataclass
class SolutionPath:
    grid: TimeGrid
    states: np.ndarray
    control: np.ndarray
    cost: CostBreakdown
    costates: Optional[np.ndarray] = None
    iterations: int = 0
    converged: bool = True
    final_rel_change: float = 0.0
    final_relaxation: Optional[float] = None

    @property
    def times(self) -> np.ndarray:
        return self.grid.times


def _rel_change(new: np.ndarray, old: np.ndarray) -> float:
    return float(np.max(np.abs(new - old)) / max(float(np.max(np.abs(new))), 1e-12))


def sweep_once(p: ModelParams, x0: np.ndarray, spec: CostSpec, grid: TimeGrid,
               u: np.ndarray, relaxation: float):
    """One forward-backward pass from control ``u``.

    Returns ``(states, costates, u_new)`` with the relaxed update applied.
    """
    X = integrate_forward(p, u, x0, grid)
    L = integrate_backward(X, u, p, spec, grid)
    u_map = control_map(X, L, p, spec, previous=u)
    u_new = np.clip(relaxation * u_map + (1.0 - relaxation) * u, 0.0, p.u_bar)
    return X, L, u_new


def _place_switches(p, x, spec, grid, u, window=10):
    """Replace each short passage between 0 and ``u_bar`` by the cheapest jump nearby.

    Near a switch the discrete costates are too sensitive for the control map
    alone to pick the node (the relaxed sweep leaves a fractional value
    there), so the jump position is settled on the cost itself.  Runs of more
    than ``window`` interior values are treated as singular arcs and kept.
    """
    u = u.copy()
    n = len(u)

    def cost(v):
        return evaluate_costs(integrate_forward(p, v, x, grid), v, spec, p, grid).j_total

    on_bound = (u == 0.0) | (u == p.u_bar)
    idx = np.nonzero(on_bound)[0]
    for i, j in zip(idx[:-1], idx[1:]):
        if u[i] == u[j] or j - i - 1 > window:
            continue
        left, right = u[i], u[j]
        lo = i
        while lo > 0 and u[lo - 1] == left and i - lo < window:
            lo -= 1
        hi = j
        while hi < n - 1 and u[hi + 1] == right and hi - j < window:
            hi += 1
        best, best_j = None, math.inf
        for m in range(lo, hi):
            v = u.copy()
            v[lo:m + 1] = left
            v[m + 1:hi + 1] = right
            jm = cost(v)
            if jm < best_j:
                best, best_j = v, jm
        u = best
    return u


def solve(p: ModelParams, x0: StateLike, spec: CostSpec, cfg: Optional[FbsConfig] = None,
          raise_on_failure: bool = False) -> SolutionPath:
    """Forward-backward sweep.

    Stops once the relative sup-norm changes of control, states and costates
    between consecutive sweeps all fall below ``cfg.rel_tol``.  On hitting
    ``max_iters`` the best effort is returned with ``converged=False`` (or
    raised inside :class:`NonConvergenceError` with ``raise_on_failure``).
    A converged iterate is replaced by the control map evaluated on it, so the
    result takes exact bound values wherever the map clamps.  For the linear
    family this is done unconditionally and each switch is then moved to the
    cheapest node within a few steps.
    """
    cfg = cfg or FbsConfig()
    grid = cfg.grid
    x = as_state_array(x0)
    if cfg.initial_control is None:
        u = np.zeros(grid.n_nodes)
    else:
        u = control_path(cfg.initial_control, grid, p.u_bar).copy()

    theta = cfg.relaxation
    X_old = L_old = None
    best = math.inf
    stall = 0
    delta = math.inf
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        X, L, u_new = sweep_once(p, x, spec, grid, u, theta)
        delta = _rel_change(u_new, u)
        if X_old is not None:
            delta = max(delta, _rel_change(X, X_old), _rel_change(L, L_old))
        u, X_old, L_old = u_new, X, L
        if delta <= cfg.rel_tol and it > 1:
            converged = True
            break
        if delta < best * (1.0 - 1e-3):
            best = delta
            stall = 0
        else:
            stall += 1
            if stall >= cfg.patience and theta > cfg.min_relaxation:
                theta = max(theta * 0.5, cfg.min_relaxation)
                log.debug("sweep %d: change %.3g stalled, relaxation -> %g", it, delta, theta)
                best = delta
                stall = 0

    X = integrate_forward(p, u, x, grid)
    L = integrate_backward(X, u, p, spec, grid)
    # relaxation only approaches the bounds geometrically; finish with one undamped map
    linear = spec.social.family == "linear"
    if linear or converged:
        u = control_map(X, L, p, spec, previous=u)
        if linear:
            u = _place_switches(p, x, spec, grid, u)
        X = integrate_forward(p, u, x, grid)
        L = integrate_backward(X, u, p, spec, grid)
    sol = SolutionPath(
        grid=grid, states=X, control=u, costates=L,
        cost=evaluate_costs(X, u, spec, p, grid),
        iterations=it, converged=converged, final_rel_change=delta,
        final_relaxation=theta,
    )
    if not converged:
        log.warning("forward-backward sweep did not converge in %d sweeps (change %.3g)",
                    cfg.max_iters, delta)
        if raise_on_failure:
            raise NonConvergenceError(
                f"no convergence after {cfg.max_iters} sweeps (last change {delta:.3g})", sol)
    return sol


def evaluate_constant_policy(p: ModelParams, x0: StateLike, spec: CostSpec, grid: TimeGrid,
                             u_const: float) -> SolutionPath:
    """Single forward pass and cost evaluation under ``u(t) = u_const``."""
    if not (math.isfinite(u_const) and 0.0 <= u_const <= p.u_bar):
        raise InvalidInputError(f"constant control must lie in [0, {p.u_bar}], got {u_const}")
    u = np.full(grid.n_nodes, float(u_const))
    X = integrate_forward(p, u, x0, grid)
    return SolutionPath(grid=grid, states=X, control=u,
                        cost=evaluate_costs(X, u, spec, p, grid))


@dataclass
class SweepRow:
    param: float
    j_none: Optional[float] = None
    j_full: Optional[float] = None
    j_opt: Optional[float] = None
    converged: Optional[bool] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class SweepResult:
    family: str
    rows: List[SweepRow]

    @property
    def opt_nondecreasing(self) -> bool:
        vals = [r.j_opt for r in self.rows if r.ok]
        return all(b >= a * (1 - 1e-9) for a, b in zip(vals, vals[1:]))


def _sweep_row(p, x0, spec, cfg, value) -> SweepRow:
    row = SweepRow(param=value)
    try:
        s = replace(spec, social=SocialCost(spec.social.family, value))
        row.j_none = evaluate_constant_policy(p, x0, s, cfg.grid, 0.0).cost.j_total
        row.j_full = evaluate_constant_policy(p, x0, s, cfg.grid, p.u_bar).cost.j_total
        sol = solve(p, x0, s, cfg)
        row.j_opt = sol.cost.j_total
        row.converged = sol.converged
    except SvirError as exc:
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def sweep_parameter(p: ModelParams, x0: StateLike, spec: CostSpec, cfg: FbsConfig,
                    values: Sequence[float], workers: int = 1) -> SweepResult:
    """Costs of no control, full control and the optimum for each family parameter.

    Rows whose evaluation fails carry an ``error`` message instead of costs;
    the order of ``values`` is preserved.
    """
    values = [float(v) for v in values]
    if not values:
        raise InvalidInputError(f"need at least one {FAMILY_PARAMETER[spec.social.family]} value")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda v: _sweep_row(p, x0, spec, cfg, v), values))
    else:
        rows = [_sweep_row(p, x0, spec, cfg, v) for v in values]
    return SweepResult(spec.social.family, rows)
