import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from svir_control import (
    InvalidInputError, ModelParams, SvirState, TimeGrid, controlled_rhs,
    disease_free_equilibrium, endemic_equilibrium, integrate_forward, reproduction_number,
)
from svir_control.model import TOL_EQ, control_path

from conftest import BASE_X0


def test_rhs_full_control_shuts_transmission(params):
    d = controlled_rhs(BASE_X0, 1.0, params)
    np.testing.assert_allclose(d, [-0.0034, 0.0034, -0.01425, 0.01425], atol=1e-15)


def test_rhs_interior_point(params):
    d = controlled_rhs((0.5, 0.2, 0.2, 0.1), 0.0, params)
    assert d[0] == pytest.approx(-0.024, abs=1e-15)
    assert d[2] == pytest.approx(0.0036864, abs=1e-15)
    # independent hand-coded vector field
    S, V, I, R = 0.5, 0.2, 0.2, 0.1
    b, al, g, g1, e = 0.22, 0.004, 0.095, 0.071, 0.078
    ref = [-b * S * I - al * S, al * S - e * b * V * I - g1 * V,
           b * S * I + e * b * V * I - g * I, g1 * V + g * I]
    np.testing.assert_allclose(d, ref, rtol=1e-14)


def test_rhs_no_infection_no_flows():
    p = ModelParams(alpha=0.0, mu=0.0)
    d = controlled_rhs((0.7, 0.1, 0.0, 0.2), 0.0, p)
    assert d[0] == 0.0 and d[2] == 0.0


def test_rhs_sums_to_zero(params):
    for u in (0.0, 0.3, 1.0):
        assert abs(controlled_rhs((0.5, 0.2, 0.2, 0.1), u, ModelParams(mu=0.01)).sum()) < 1e-16


@pytest.mark.parametrize("u", [-0.1, 1.5, math.nan])
def test_rhs_rejects_bad_control(params, u):
    with pytest.raises(InvalidInputError):
        controlled_rhs(BASE_X0, u, params)


def test_params_validation():
    with pytest.raises(InvalidInputError, match="beta0"):
        ModelParams(beta0=0.0)
    with pytest.raises(InvalidInputError, match="gamma1"):
        ModelParams(gamma1=-1.0)
    with pytest.raises(InvalidInputError, match="eps"):
        ModelParams(eps=1.2)
    with pytest.raises(InvalidInputError, match="u_bar"):
        ModelParams(u_bar=1.01)
    assert ModelParams().beta1 == pytest.approx(0.01716)


def test_forward_pure_vaccination_decay():
    p = ModelParams(alpha=0.004)
    X = integrate_forward(p, 0.0, (1.0, 0.0, 0.0, 0.0), TimeGrid(0, 100, 1000))
    assert X[-1, 0] == pytest.approx(math.exp(-0.4), abs=1e-6)


def test_forward_infection_free_subspace(params):
    X = integrate_forward(params, 0.0, (0.9, 0.1, 0.0, 0.0), TimeGrid(0, 240, 2400))
    assert np.all(X[:, 2] == 0.0)


def test_forward_shape_and_initial_row(params):
    grid = TimeGrid(0, 10, 100)
    X = integrate_forward(params, 0.2, BASE_X0, grid)
    assert X.shape == (101, 4)
    np.testing.assert_array_equal(X[0], BASE_X0.as_array())


def test_control_path_validation():
    grid = TimeGrid(0, 1, 10)
    assert control_path(0.3, grid).shape == (11,)
    with pytest.raises(InvalidInputError):
        control_path(np.zeros(5), grid)
    with pytest.raises(InvalidInputError):
        control_path(0.9, grid, u_bar=0.5)


@settings(max_examples=40, deadline=None)
@given(
    w=st.lists(st.floats(0.01, 1.0), min_size=4, max_size=4),
    knots=st.lists(st.floats(0.0, 1.0), min_size=5, max_size=5),
    mu=st.floats(0.0, 0.02),
)
def test_conservation_and_nonnegativity(w, knots, mu):
    x0 = np.array(w) / sum(w)
    grid = TimeGrid(0, 120, 1200)
    u = np.interp(grid.times, np.linspace(0, 120, 5), knots)
    X = integrate_forward(ModelParams(mu=mu), u, x0, grid)
    assert np.max(np.abs(X.sum(axis=1) - 1.0)) <= 1e-8
    assert X.min() >= -1e-9


@pytest.mark.parametrize("u", [0.0, 0.5])
def test_rk4_observed_order(params, u):
    ref = integrate_forward(params, u, BASE_X0, TimeGrid(0, 60, 9600))[-1]
    errs = []
    for n in (150, 300, 600):
        errs.append(np.max(np.abs(integrate_forward(params, u, BASE_X0, TimeGrid(0, 60, n))[-1] - ref)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 3.5), orders


def test_reproduction_number(params):
    assert reproduction_number(params) == 0.0
    assert reproduction_number(ModelParams(mu=0.005)) == pytest.approx(1.22, abs=0.01)
    assert reproduction_number(ModelParams(alpha=0.0, mu=0.005)) == pytest.approx(2.2, rel=1e-12)


def test_disease_free_equilibrium():
    e = disease_free_equilibrium(ModelParams())
    assert (e.state.S, e.state.V, e.state.I) == (0.0, 0.0, 0.0)
    e = disease_free_equilibrium(ModelParams(mu=0.005))
    assert e.state.S == pytest.approx(0.005 / 0.009, rel=1e-12)
    assert e.state.V == pytest.approx(0.0292, abs=1e-4)
    e = disease_free_equilibrium(ModelParams(alpha=0.0, mu=0.01))
    assert (e.state.S, e.state.V, e.state.I) == (1.0, 0.0, 0.0)


def test_endemic_equilibrium(params):
    assert endemic_equilibrium(params) is None
    p = ModelParams(mu=0.005)
    e = endemic_equilibrium(p)
    assert e is not None and e.state.I > 0
    assert np.linalg.norm(controlled_rhs(e.state, 0.0, p)) <= 1e-10
    assert e.state.total == pytest.approx(1.0, abs=1e-12)


def test_endemic_long_run_approaches_equilibrium():
    p = ModelParams(mu=0.005)
    X = integrate_forward(p, 0.0, BASE_X0, TimeGrid(0, 4000, 40000))
    e = endemic_equilibrium(p).state.as_array()
    assert np.max(np.abs(X[-1] - e)) <= TOL_EQ
    assert np.linalg.norm(controlled_rhs(X[-1], 0.0, p)) <= TOL_EQ


@pytest.mark.parametrize("gamma", [0.095, 0.2])
def test_subthreshold_infection_dies_out(gamma):
    p = ModelParams(gamma=gamma, mu=0.001)
    assert reproduction_number(p) < 1
    X = integrate_forward(p, 0.0, BASE_X0, TimeGrid(0, 2000, 20000))
    assert X[-1, 2] < 1e-6


def test_more_control_can_raise_later_infection(params):
    # stronger early control leaves more susceptibles, so infection can rebound above the uncontrolled path
    grid = TimeGrid(0, 240, 2400)
    u_strong = np.where(grid.times < 60, 1.0, 0.0)
    I_none = integrate_forward(params, 0.0, BASE_X0, grid)[:, 2]
    I_strong = integrate_forward(params, u_strong, BASE_X0, grid)[:, 2]
    assert np.all(u_strong >= 0.0)
    assert np.any(I_strong > I_none + 1e-4)


@settings(max_examples=30, deadline=None)
@given(u1=st.floats(0.0, 1.0), du=st.floats(0.0, 1.0))
def test_more_control_lowers_infection_early(u1, du):
    # the ordering holds while susceptible depletion is still small
    p = ModelParams()
    u2 = min(1.0, u1 + du)
    grid = TimeGrid(0, 10, 100)
    I1 = integrate_forward(p, u1, BASE_X0, grid)[:, 2]
    I2 = integrate_forward(p, u2, BASE_X0, grid)[:, 2]
    assert np.all(I2 <= I1 + 1e-12)


def test_instability_and_bad_state(params):
    with pytest.raises(InvalidInputError):
        integrate_forward(params, 0.0, (0.5, 0.5, math.inf, 0.0), TimeGrid(0, 1, 10))
    with pytest.raises(InvalidInputError):
        SvirState(0.1, math.nan, 0.0, 0.0)
    with pytest.raises(InvalidInputError):
        TimeGrid(1.0, 1.0, 10)
