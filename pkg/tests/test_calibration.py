import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from svir_control import InvalidInputError
from svir_control.calibration import (
    THETA_NAMES, ObservedSeries, baseline_beta, build_regression, estimate_constant_params,
    estimate_time_varying_sir, expost_control, read_series_csv, simulate_discrete, write_series_csv,
)

from conftest import DATA

BASELINE_THETA = (0.22, 0.004, 0.071, 0.095)
X0 = (0.85, 0.0, 0.15, 0.0)


def _noisy_series(theta, x0, n, mu, sigma, rng):
    # process noise enters each daily update, i.e. the regression targets directly
    beta, alpha, gamma1, gamma = theta
    X = np.zeros((n, 4))
    X[0] = x0
    for k in range(n - 1):
        S, V, I, R = X[k]
        X[k + 1] = (S - beta * S * I - alpha * S + mu - mu * S,
                    V + alpha * S - 0.078 * beta * V * I - gamma1 * V - mu * V,
                    I + beta * S * I + 0.078 * beta * V * I - gamma * I - mu * I,
                    R + gamma1 * V + gamma * I - mu * R) + rng.uniform(-sigma, sigma, 4)
    return ObservedSeries(np.arange(n), *X.T)


def _kkt_gradient(series, mu, eps, theta):
    A, D = build_regression(series, mu, eps)
    M, y = A.reshape(-1, 4), D.reshape(-1)
    return M.T @ (M @ theta - y)


def test_regression_shapes_and_identity():
    s = simulate_discrete(BASELINE_THETA, X0, 2, eps=0.078)
    A, D = build_regression(s, 0.0, 0.078)
    assert A.shape == (1, 4, 4) and D.shape == (1, 4)
    np.testing.assert_allclose(A[0] @ np.array(BASELINE_THETA), D[0], atol=1e-16)
    s = simulate_discrete(BASELINE_THETA, X0, 30, mu=0.01, eps=0.078)
    A, D = build_regression(s, 0.01, 0.078)
    assert A.shape == (29, 4, 4)
    np.testing.assert_allclose(np.einsum("nij,j->ni", A, BASELINE_THETA), D, atol=1e-15)


def test_regression_infection_free_row():
    s = simulate_discrete(BASELINE_THETA, (0.8, 0.1, 0.0, 0.1), 5, eps=0.078)
    A, D = build_regression(s, 0.0, 0.078)
    assert np.all(A[:, 2, :] == 0.0)
    assert np.all(D[:, 2] == 0.0)


def test_regression_validation():
    s = simulate_discrete(BASELINE_THETA, X0, 5)
    with pytest.raises(InvalidInputError):
        build_regression(s, -0.1, 0.078)
    with pytest.raises(InvalidInputError):
        ObservedSeries([0], [1.0], [0.0], [0.0], [0.0])


def test_constant_round_trip():
    s = simulate_discrete(BASELINE_THETA, X0, 60, eps=0.078)
    est = estimate_constant_params(s, 0.0, 0.078)
    np.testing.assert_allclose(est.theta, BASELINE_THETA, atol=1e-6)
    assert est.residual_sse <= 1e-20
    assert est.rank == 4 and est.degenerate_directions.shape == (0, 4)


def test_round_trip_through_csv(tmp_path):
    est = estimate_constant_params(read_series_csv(DATA / "svir_baseline.csv"), 0.0, 0.078)
    np.testing.assert_allclose(est.theta, BASELINE_THETA, atol=1e-6)


@settings(max_examples=25, deadline=None)
@given(beta=st.floats(0.05, 0.5), alpha=st.floats(1e-3, 0.02), gamma1=st.floats(0.0, 0.1),
       gamma=st.floats(0.02, 0.2), n=st.integers(10, 365), mu=st.floats(0.0, 0.01))
def test_round_trip_property(beta, alpha, gamma1, gamma, n, mu):
    theta = (beta, alpha, gamma1, gamma)
    s = simulate_discrete(theta, (0.8, 0.05, 0.1, 0.05), n, mu=mu, eps=0.078)
    est = estimate_constant_params(s, mu, 0.078)
    np.testing.assert_allclose(est.theta, theta, atol=1e-6)
    assert np.all(est.theta >= 0)


def test_residual_sse_is_recomputable(rng):
    s = _noisy_series(BASELINE_THETA, X0, 40, 0.0, 1e-3, rng)
    est = estimate_constant_params(s, 0.0, 0.078)
    A, D = build_regression(s, 0.0, 0.078)
    r = D - np.einsum("nij,j->ni", A, est.theta)
    assert est.residual_sse == pytest.approx(np.sum(r ** 2), abs=1e-10)
    np.testing.assert_allclose(est.residual_norms, np.sqrt(np.sum(r ** 2, axis=0)))


def test_kkt_on_noisy_data(rng):
    for _ in range(5):
        s = _noisy_series(BASELINE_THETA, X0, 40, 0.0, 1e-3, rng)
        est = estimate_constant_params(s, 0.0, 0.078)
        g = _kkt_gradient(s, 0.0, 0.078, est.theta)
        assert np.all(est.theta >= 0)
        for th, gi in zip(est.theta, g):
            assert gi >= -1e-8 if th == 0 else abs(gi) <= 1e-8


def test_infeasible_truth_lands_on_boundary():
    # a negative vaccination rate cannot be returned; the fit sits on alpha = 0
    theta = (0.0, -0.002, 0.0, 0.095)
    s = simulate_discrete(theta, (0.6, 0.3, 0.1, 0.0), 12, eps=0.078)
    est = estimate_constant_params(s, 0.0, 0.078, free=("alpha", "gamma"))
    assert est.theta[1] == 0.0
    g = _kkt_gradient(s, 0.0, 0.078, est.theta)
    assert g[1] >= 0 and abs(g[3]) <= 1e-10
    # dense grid over the 2-parameter subproblem
    A, D = build_regression(s, 0.0, 0.078)
    M, y = A.reshape(-1, 4)[:, [1, 3]], D.reshape(-1)
    al, ga = np.meshgrid(np.linspace(0, 0.01, 401), np.linspace(0.05, 0.15, 401), indexing="ij")
    r = M[:, 0, None, None] * al + M[:, 1, None, None] * ga - y[:, None, None]
    sse = np.sum(r ** 2, axis=0)
    i, j = np.unravel_index(np.argmin(sse), sse.shape)
    assert i == 0
    assert abs(ga[i, j] - est.theta[3]) <= 0.1 / 400
    assert est.residual_sse <= sse.min() + 1e-15


def test_rank_deficient_reports_direction():
    # without vaccination V stays 0 and gamma1 is not identifiable
    s = simulate_discrete((0.22, 0.0, 0.071, 0.095), X0, 30, eps=0.078)
    est = estimate_constant_params(s, 0.0, 0.078)
    assert est.rank == 3
    d = est.degenerate_directions
    assert d.shape == (1, 4)
    np.testing.assert_allclose(np.abs(d[0]), [0, 0, 1, 0], atol=1e-12)
    assert est.theta[2] == 0.0
    np.testing.assert_allclose(est.theta[[0, 1, 3]], [0.22, 0.0, 0.095], atol=1e-9)


def test_pinned_parameters_and_names():
    s = simulate_discrete((0.22, 0.0, 0.0, 0.095), X0, 30)
    est = estimate_constant_params(s, 0.0, 0.0, free=("beta", "gamma"))
    assert est.free == ("beta", "gamma")
    assert est.theta[1] == est.theta[2] == 0.0
    assert list(est.as_dict())[:4] == list(THETA_NAMES)
    with pytest.raises(InvalidInputError, match="unknown"):
        estimate_constant_params(s, 0.0, 0.0, free=("delta",))


def test_noise_consistency():
    ratios = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        theta = np.array((0.3, 0.004, 0.071, 0.095))
        errs = []
        for n in (30, 300):
            s = _noisy_series(theta, X0, n, 0.01, 1e-4, rng)
            errs.append(np.max(np.abs(estimate_constant_params(s, 0.01, 0.078).theta - theta)))
        ratios.append(errs[1] / errs[0])
    assert np.median(ratios) < 0.5


def test_daily_sir_constant():
    s = simulate_discrete((0.2, 0.0, 0.0, 0.1), (0.99, 0.0, 0.01, 0.0), 50)
    d = estimate_time_varying_sir(s, 0.0)
    np.testing.assert_allclose(d.beta, 0.2, rtol=1e-9)
    np.testing.assert_allclose(d.gamma, 0.1, rtol=1e-9)


def test_daily_sir_step():
    betas = np.where(np.arange(29) < 10, 0.3, 0.1)
    s = simulate_discrete((0.3, 0.0, 0.0, 0.1), (0.99, 0.0, 0.01, 0.0), 30, beta_path=betas)
    np.testing.assert_allclose(estimate_time_varying_sir(s, 0.0).beta, betas, rtol=1e-9)


def test_daily_sir_stepped_fixture():
    d = estimate_time_varying_sir(read_series_csv(DATA / "sir_stepped_beta.csv"), 0.0)
    expect = np.where(np.arange(59) < 20, 0.3, np.where(np.arange(59) < 40, 0.15, 0.22))
    np.testing.assert_allclose(d.beta, expect, rtol=1e-6)


def test_daily_missing_days():
    s = ObservedSeries(np.arange(3), [0.9, 0.9, 0.89], [0, 0, 0], [0.0, 0.1, 0.1], [0.1, 0.0, 0.01])
    d = estimate_time_varying_sir(s, 0.0)
    assert np.isnan(d.beta[0]) and np.isnan(d.gamma[0])
    assert not d.valid[0] and d.valid[1]


def test_expost_examples():
    u, c = expost_control([0.22, 0.0, 0.11, 0.3, -0.01, np.nan], 0.22)
    np.testing.assert_allclose(u[:5], [0.0, 1.0, 0.5, 0.0, 1.0])
    assert np.isnan(u[5])
    assert c.tolist() == [False, False, False, True, True, False]
    with pytest.raises(InvalidInputError):
        expost_control([0.1], 0.0)


def test_expost_identity():
    u_true = np.where(np.arange(79) < 30, 0.0, 0.6)
    s = simulate_discrete((0.22, 0.0, 0.0, 0.095), (0.99, 0.0, 0.01, 0.0), 80,
                          beta_path=0.22 * (1 - u_true))
    beta0 = baseline_beta(s, 0.0)
    assert beta0 == pytest.approx(0.22, rel=1e-12)
    u, clamped = expost_control(estimate_time_varying_sir(s, 0.0).beta, beta0)
    np.testing.assert_allclose(u, u_true, atol=1e-12)
    assert not clamped.any()


def test_baseline_window_checks():
    s = simulate_discrete((0.22, 0.0, 0.0, 0.095), (0.99, 0.0, 0.01, 0.0), 30)
    assert baseline_beta(s, 0.0, 5, 15) == pytest.approx(0.22, rel=1e-12)
    with pytest.raises(InvalidInputError, match="outside"):
        baseline_beta(s, 0.0, 20, 40)


def test_csv_round_trip(tmp_path):
    s = simulate_discrete(BASELINE_THETA, X0, 10, eps=0.078)
    path = tmp_path / "s.csv"
    write_series_csv(s, path)
    back = read_series_csv(path)
    np.testing.assert_allclose(back.as_array(), s.as_array(), rtol=1e-9)
    assert back.dates.tolist() == list(range(10))


def test_csv_counts_and_iso_dates():
    s = read_series_csv(DATA / "national_snapshot.csv", population=60_360_000)
    assert len(s) == 120 and s.population == 60_360_000
    assert s.labels[0] == "2020-02-24"
    assert np.all(np.abs(s.as_array().sum(axis=1) - 1) < 1e-6)


@pytest.mark.parametrize("text,message", [
    ("date,S,V,I\n0,1,0,0\n", "header"),
    ("date,S,V,I,R\n0,0.9,0,0.1,0\n1,0.9,0,abc,0\n", "line 3"),
    ("date,S,V,I,R\n0,0.9,0,0.1,0\n0,0.9,0,0.1,0\n", "line 3"),
    ("date,S,V,I,R\n0,0.9,0,0.1,0\n1,0.9,0,0.1\n", "line 3: expected 5"),
    ("date,S,V,I,R\n0,0.9,0,0.1,0\n1,1.2,0,0.1,0\n", "leaves"),
    ("date,S,V,I,R\n0,0.5,0,0.1,0\n1,0.5,0,0.1,0\n", "sum"),
    ("date,S,V,I,R\n2020-13-01,0.9,0,0.1,0\n", "line 2"),
    ("date,S_count,V_count,I_count,R_count\n0,90,0,10,0\n", "population"),
    ("", "empty"),
])
def test_csv_errors(tmp_path, text, message):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(InvalidInputError, match=message):
        read_series_csv(path)
