"""Compiled inner loops for the forward and backward RK4 sweeps.

The scalar right-hand sides here are the single source of truth for the
dynamics; the public wrappers in :mod:`svir_control.model` and
:mod:`svir_control.pmp` call them directly.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def svir_rhs(S, V, I, R, u, beta0, alpha, gamma, gamma1, mu, eps):
    b = beta0 * (1.0 - u)
    dS = -b * S * I - alpha * S + mu - mu * S
    dV = alpha * S - eps * b * V * I - gamma1 * V - mu * V
    dI = b * S * I + eps * b * V * I - gamma * I - mu * I
    dR = gamma1 * V + gamma * I - mu * R
    return dS, dV, dI, dR


@njit(cache=True)
def costate_rhs(S, V, I, l1, l2, l3, u, beta0, alpha, gamma, gamma1, mu, eps, c1, c2):
    b = beta0 * (1.0 - u)
    d1 = (b * I + alpha + mu) * l1 - alpha * l2 - b * I * l3 - c2 * alpha
    d2 = (eps * b * I + gamma1 + mu) * l2 - eps * b * I * l3
    d3 = b * S * l1 + eps * b * V * l2 - (b * S + eps * b * V - gamma - mu) * l3 - c1
    return d1, d2, d3


@njit(cache=True)
def rk4_forward(x0, u, h, beta0, alpha, gamma, gamma1, mu, eps, tol_state):
    """Integrate the state on a uniform grid.

    Returns ``(X, bad_step)``; ``bad_step`` is -1 on success, otherwise the
    index of the first step whose result has a component below
    ``-tol_state`` or a non-finite value (rows after it are left zero).
    """
    n = u.shape[0] - 1
    X = np.zeros((n + 1, 4))
    X[0, :] = x0
    S, V, I, R = x0[0], x0[1], x0[2], x0[3]
    for k in range(n):
        uk = u[k]
        a1, a2, a3, a4 = svir_rhs(S, V, I, R, uk, beta0, alpha, gamma, gamma1, mu, eps)
        b1, b2, b3, b4 = svir_rhs(S + 0.5 * h * a1, V + 0.5 * h * a2, I + 0.5 * h * a3,
                                  R + 0.5 * h * a4, uk, beta0, alpha, gamma, gamma1, mu, eps)
        c1_, c2_, c3, c4 = svir_rhs(S + 0.5 * h * b1, V + 0.5 * h * b2, I + 0.5 * h * b3,
                                    R + 0.5 * h * b4, uk, beta0, alpha, gamma, gamma1, mu, eps)
        d1, d2, d3, d4 = svir_rhs(S + h * c1_, V + h * c2_, I + h * c3, R + h * c4,
                                  uk, beta0, alpha, gamma, gamma1, mu, eps)
        S = S + h / 6.0 * (a1 + 2.0 * b1 + 2.0 * c1_ + d1)
        V = V + h / 6.0 * (a2 + 2.0 * b2 + 2.0 * c2_ + d2)
        I = I + h / 6.0 * (a3 + 2.0 * b3 + 2.0 * c3 + d3)
        R = R + h / 6.0 * (a4 + 2.0 * b4 + 2.0 * c4 + d4)
        if not (np.isfinite(S) and np.isfinite(V) and np.isfinite(I) and np.isfinite(R)):
            return X, k
        if S < -tol_state or V < -tol_state or I < -tol_state or R < -tol_state:
            return X, k
        X[k + 1, 0] = S
        X[k + 1, 1] = V
        X[k + 1, 2] = I
        X[k + 1, 3] = R
    return X, -1


@njit(cache=True)
def rk4_backward(X, u, h, beta0, alpha, gamma, gamma1, mu, eps, c1, c2):
    """Integrate the costates from zero terminal data back to the first node.

    Stage states are interpolated linearly between grid nodes (the midpoint
    stages use the node average); the control on ``[t_k, t_{k+1}]`` is
    ``u[k]``.  Returns ``(L, bad_step)`` like :func:`rk4_forward`.
    """
    n = u.shape[0] - 1
    L = np.zeros((n + 1, 3))
    l1, l2, l3 = 0.0, 0.0, 0.0
    for k in range(n, 0, -1):
        uk = u[k - 1]
        Sr, Vr, Ir = X[k, 0], X[k, 1], X[k, 2]
        Sl, Vl, Il = X[k - 1, 0], X[k - 1, 1], X[k - 1, 2]
        Sm, Vm, Im = 0.5 * (Sr + Sl), 0.5 * (Vr + Vl), 0.5 * (Ir + Il)
        a1, a2, a3 = costate_rhs(Sr, Vr, Ir, l1, l2, l3, uk, beta0, alpha, gamma,
                                 gamma1, mu, eps, c1, c2)
        b1, b2, b3 = costate_rhs(Sm, Vm, Im, l1 - 0.5 * h * a1, l2 - 0.5 * h * a2,
                                 l3 - 0.5 * h * a3, uk, beta0, alpha, gamma, gamma1,
                                 mu, eps, c1, c2)
        e1, e2, e3 = costate_rhs(Sm, Vm, Im, l1 - 0.5 * h * b1, l2 - 0.5 * h * b2,
                                 l3 - 0.5 * h * b3, uk, beta0, alpha, gamma, gamma1,
                                 mu, eps, c1, c2)
        d1, d2, d3 = costate_rhs(Sl, Vl, Il, l1 - h * e1, l2 - h * e2, l3 - h * e3,
                                 uk, beta0, alpha, gamma, gamma1, mu, eps, c1, c2)
        l1 = l1 - h / 6.0 * (a1 + 2.0 * b1 + 2.0 * e1 + d1)
        l2 = l2 - h / 6.0 * (a2 + 2.0 * b2 + 2.0 * e2 + d2)
        l3 = l3 - h / 6.0 * (a3 + 2.0 * b3 + 2.0 * e3 + d3)
        if not (np.isfinite(l1) and np.isfinite(l2) and np.isfinite(l3)):
            return L, k - 1
        L[k - 1, 0] = l1
        L[k - 1, 1] = l2
        L[k - 1, 2] = l3
    return L, -1
