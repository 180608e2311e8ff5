"""Parameter estimation from daily compartment observations.

The daily model is the explicit one-day Euler step of the SVIR system,
which is linear in ``theta = (beta, alpha, gamma1, gamma)`` once ``mu`` and
``eps`` are fixed.  Every day ``n`` contributes a block ``A_n theta = D_n``
of four equations.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize, nnls

from .errors import InvalidInputError

THETA_NAMES = ("beta", "alpha", "gamma1", "gamma")
TOL_DEN = 1e-12
SUM_TOLERANCE = 0.05
TOL_CLAMP = 1e-6  # raw controls this far outside [0, 1] count as rounding noise


@dataclass
class ObservedSeries:
    """Daily compartment fractions; ``dates`` are ordinal day numbers."""

    dates: np.ndarray
    S: np.ndarray
    V: np.ndarray
    I: np.ndarray
    R: np.ndarray
    population: float = 1.0
    labels: Optional[list] = None

    def __post_init__(self):
        arrays = [np.asarray(getattr(self, k), dtype=float) for k in ("S", "V", "I", "R")]
        self.dates = np.asarray(self.dates)
        self.S, self.V, self.I, self.R = arrays
        n = len(self.dates)
        if n < 2:
            raise InvalidInputError(f"need at least 2 observations, got {n}")
        for name, arr in zip("SVIR", arrays):
            if arr.shape != (n,):
                raise InvalidInputError(f"column {name} has {arr.shape[0]} rows, dates have {n}")
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"column {name} contains non-finite values")
            bad = np.where((arr < 0) | (arr > 1))[0]
            if bad.size:
                raise InvalidInputError(
                    f"column {name} leaves [0, 1] at row {int(bad[0])}: {arr[bad[0]]}")
        if np.any(np.diff(self.dates.astype(float)) <= 0):
            raise InvalidInputError("dates must be strictly increasing")
        total = self.S + self.V + self.I + self.R
        bad = np.where(np.abs(total - 1.0) > SUM_TOLERANCE)[0]
        if bad.size:
            raise InvalidInputError(
                f"compartments at row {int(bad[0])} sum to {total[bad[0]]:.4f}, "
                f"outside 1 +/- {SUM_TOLERANCE}")

    def __len__(self):
        return len(self.dates)

    def window(self, start: int, stop: int) -> "ObservedSeries":
        """Rows ``start`` (inclusive) to ``stop`` (exclusive)."""
        n = len(self)
        if not (0 <= start < stop <= n) or stop - start < 2:
            raise InvalidInputError(
                f"window {start}:{stop} is outside the series (length {n}) or too short")
        sl = slice(start, stop)
        return ObservedSeries(self.dates[sl], self.S[sl], self.V[sl], self.I[sl], self.R[sl],
                              self.population,
                              None if self.labels is None else self.labels[sl])

    def as_array(self) -> np.ndarray:
        return np.column_stack([self.S, self.V, self.I, self.R])


@dataclass
class EstimationResult:
    theta: np.ndarray
    residual_sse: float
    residual_norms: np.ndarray  # per equation (S, V, I, R rows)
    rank: int
    degenerate_directions: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))
    free: Tuple[str, ...] = THETA_NAMES

    def as_dict(self) -> dict:
        return {
            **{name: float(v) for name, v in zip(THETA_NAMES, self.theta)},
            "residual_sse": self.residual_sse,
            "residual_norms": {k: float(v) for k, v in zip("SVIR", self.residual_norms)},
            "rank": self.rank,
            "free": list(self.free),
            "degenerate_directions": self.degenerate_directions.tolist(),
        }


def build_regression(series: ObservedSeries, mu: float, eps: float):
    """Per-day blocks ``(A, D)`` of shapes ``(N-1, 4, 4)`` and ``(N-1, 4)``.

    ``D_n`` removes the parameter-free part of each update, in particular the
    birth inflow ``mu`` of the susceptible row.
    """
    if len(series) < 2:
        raise InvalidInputError("need at least two days of observations")
    if not (mu >= 0 and 0 <= eps <= 1):
        raise InvalidInputError(f"need mu >= 0 and eps in [0, 1], got mu={mu}, eps={eps}")
    S, V, I, R = series.S, series.V, series.I, series.R
    s, v, i, r = S[:-1], V[:-1], I[:-1], R[:-1]
    D = np.column_stack([
        S[1:] - s * (1 - mu) - mu,
        V[1:] - v * (1 - mu),
        I[1:] - i * (1 - mu),
        R[1:] - r * (1 - mu),
    ])
    zero = np.zeros_like(s)
    A = np.stack([
        np.column_stack([-s * i, -s, zero, zero]),
        np.column_stack([-eps * v * i, s, -v, zero]),
        np.column_stack([(s + eps * v) * i, zero, zero, -i]),
        np.column_stack([zero, zero, v, i]),
    ], axis=1)
    return A, D


def _free_mask(free: Iterable[str]) -> np.ndarray:
    free = tuple(free)
    unknown = set(free) - set(THETA_NAMES)
    if unknown:
        raise InvalidInputError(f"unknown parameter(s) {sorted(unknown)}; expected {THETA_NAMES}")
    return np.array([name in free for name in THETA_NAMES])


def estimate_constant_params(series: ObservedSeries, mu: float, eps: float,
                             free: Sequence[str] = THETA_NAMES) -> EstimationResult:
    """Non-negative least squares for constant ``theta``.

    Parameters not listed in ``free`` are pinned to zero.  When the stacked
    design is rank deficient the degenerate directions are reported and the
    minimum-norm point of the optimal set is returned.
    """
    mask = _free_mask(free)
    A, D = build_regression(series, mu, eps)
    M = A.reshape(-1, 4)[:, mask]
    y = D.reshape(-1)
    if M.shape[0] < 4:
        raise InvalidInputError(f"stacked system has {M.shape[0]} rows; need at least 4")
    scale = np.linalg.norm(M, axis=0)
    scale[scale == 0] = 1.0
    sol, _ = nnls(M / scale, y, maxiter=50 * M.shape[1])
    sol = sol / scale

    sv, vt = np.linalg.svd(M, full_matrices=True)[1:]
    tol = max(M.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
    rank = int(np.sum(sv > tol))
    null = vt[rank:]
    if null.shape[0]:
        sol = _min_norm_on_face(sol, null)

    theta = np.zeros(4)
    theta[mask] = sol
    degenerate = np.zeros((null.shape[0], 4))
    degenerate[:, mask] = null
    resid = (D - np.einsum("nij,j->ni", A, theta))
    return EstimationResult(
        theta=theta,
        residual_sse=float(np.sum(resid ** 2)),
        residual_norms=np.sqrt(np.sum(resid ** 2, axis=0)),
        rank=rank,
        degenerate_directions=degenerate,
        free=tuple(n for n, m in zip(THETA_NAMES, mask) if m),
    )


def _min_norm_on_face(x: np.ndarray, null: np.ndarray) -> np.ndarray:
    # fitted values are unchanged along the null space, so minimise |x + N'z| subject to >= 0
    def obj(z):
        w = x + null.T @ z
        return float(w @ w), 2.0 * (null @ w)

    cons = {"type": "ineq", "fun": lambda z: x + null.T @ z, "jac": lambda z: null.T}
    res = minimize(obj, np.zeros(null.shape[0]), jac=True, constraints=[cons],
                   method="SLSQP", options={"ftol": 1e-15, "maxiter": 200})
    out = x + null.T @ res.x if res.success else x
    return np.maximum(out, 0.0)


@dataclass
class DailyEstimates:
    dates: np.ndarray
    beta: np.ndarray   # NaN marks a missing day
    gamma: np.ndarray

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.beta)


def estimate_time_varying_sir(series: ObservedSeries, mu: float,
                              tol_den: float = TOL_DEN) -> DailyEstimates:
    """Closed-form day-by-day ``beta_n`` and ``gamma_n`` with no vaccination.

    Days with ``S_n I_n <= tol_den`` or ``I_n <= tol_den`` are reported as NaN.
    """
    A, D = build_regression(series, mu, 0.0)
    s, i = series.S[:-1], series.I[:-1]
    ok = (s * i > tol_den) & (i > tol_den)
    beta = np.full(len(s), np.nan)
    gamma = np.full(len(s), np.nan)
    beta[ok] = -D[ok, 0] / (s[ok] * i[ok])
    gamma[ok] = D[ok, 3] / i[ok]
    return DailyEstimates(series.dates[:-1], beta, gamma)


def expost_control(beta_series, beta0: float, tol: float = TOL_CLAMP):
    """Realised control ``1 - beta_n / beta0``, clamped to ``[0, 1]``.

    Returns ``(u_hat, clamped)``; ``clamped`` flags days whose raw value fell
    more than ``tol`` outside the unit interval.  Missing (NaN) days stay NaN
    and unflagged.
    """
    if not (math.isfinite(beta0) and beta0 > 0):
        raise InvalidInputError(f"baseline transmission rate must be positive, got {beta0}")
    b = np.asarray(beta_series, dtype=float)
    raw = 1.0 - b / beta0
    with np.errstate(invalid="ignore"):
        clamped = np.isfinite(raw) & ((raw < -tol) | (raw > 1.0 + tol))
    return np.clip(raw, 0.0, 1.0), clamped


def baseline_beta(series: ObservedSeries, mu: float, start: int = 0,
                  stop: Optional[int] = None) -> float:
    """Constant ``beta`` fitted on rows ``start:stop`` with ``alpha = gamma1 = 0``."""
    stop = min(len(series), 21) if stop is None else stop
    est = estimate_constant_params(series.window(start, stop), mu, 0.0, free=("beta", "gamma"))
    return float(est.theta[0])


def simulate_discrete(theta, x0, n_days: int, mu: float = 0.0, eps: float = 0.0,
                      beta_path=None, start_date: int = 0) -> ObservedSeries:
    """Generate a series from the daily model.

    ``beta_path`` (length ``n_days - 1``) overrides the constant ``beta`` on
    each transition, which is how stepped-transmission fixtures are built.
    """
    beta, alpha, gamma1, gamma = map(float, theta)
    if n_days < 2:
        raise InvalidInputError("n_days must be at least 2")
    betas = np.full(n_days - 1, beta) if beta_path is None else np.asarray(beta_path, float)
    if betas.shape != (n_days - 1,):
        raise InvalidInputError(f"beta_path needs {n_days - 1} values")
    X = np.zeros((n_days, 4))
    X[0] = x0
    for n in range(n_days - 1):
        S, V, I, R = X[n]
        b = betas[n]
        X[n + 1] = (
            S - b * S * I - alpha * S + mu - mu * S,
            V + alpha * S - eps * b * V * I - gamma1 * V - mu * V,
            I + b * S * I + eps * b * V * I - gamma * I - mu * I,
            R + gamma1 * V + gamma * I - mu * R,
        )
    dates = np.arange(start_date, start_date + n_days)
    return ObservedSeries(dates, X[:, 0], X[:, 1], X[:, 2], X[:, 3])


def _parse_date(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    from datetime import date
    try:
        return date.fromisoformat(text).toordinal()
    except ValueError as exc:
        raise InvalidInputError(f"cannot parse date {text!r}") from exc


def read_series_csv(path, population: Optional[float] = None) -> ObservedSeries:
    """Load ``date,S,V,I,R`` fractions or ``date,S_count,...`` counts.

    Count files need ``population``.  Dates are ISO ``YYYY-MM-DD`` or integer
    day numbers.  Errors name the offending (1-based, header = 1) line.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InvalidInputError(f"{path}: empty file") from None
        frac_cols = ["date", "S", "V", "I", "R"]
        count_cols = ["date", "S_count", "V_count", "I_count", "R_count"]
        if header == frac_cols:
            counts = False
        elif header == count_cols:
            counts = True
            if population is None or not population > 0:
                raise InvalidInputError(f"{path}: count columns need a positive --population")
        else:
            raise InvalidInputError(
                f"{path}: header must be {','.join(frac_cols)} or {','.join(count_cols)}, "
                f"got {','.join(header)}")
        labels, dates, rows = [], [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != 5:
                raise InvalidInputError(f"{path}: line {lineno}: expected 5 fields, got {len(rec)}")
            try:
                vals = [float(c) for c in rec[1:]]
            except ValueError as exc:
                raise InvalidInputError(f"{path}: line {lineno}: {exc}") from None
            labels.append(rec[0].strip())
            try:
                dates.append(_parse_date(rec[0]))
            except InvalidInputError as exc:
                raise InvalidInputError(f"{path}: line {lineno}: {exc}") from None
            rows.append(vals)
    if not rows:
        raise InvalidInputError(f"{path}: no data rows")
    X = np.asarray(rows, dtype=float)
    pop = 1.0
    if counts:
        pop = float(population)
        X = X / pop
    dates = np.asarray(dates)
    step = np.diff(dates)
    if np.any(step <= 0):
        bad = int(np.where(step <= 0)[0][0]) + 3
        raise InvalidInputError(f"{path}: line {bad}: dates must be strictly increasing")
    try:
        return ObservedSeries(dates, X[:, 0], X[:, 1], X[:, 2], X[:, 3], pop, labels)
    except InvalidInputError as exc:
        raise InvalidInputError(f"{path}: {exc}") from None


def write_series_csv(series: ObservedSeries, path, digits: int = 10) -> None:
    labels = series.labels or [str(d) for d in series.dates]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "S", "V", "I", "R"])
        for k, lab in enumerate(labels):
            w.writerow([lab] + [f"{x:.{digits}g}" for x in
                                (series.S[k], series.V[k], series.I[k], series.R[k])])
