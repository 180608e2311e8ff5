from pathlib import Path

import numpy as np
import pytest

from svir_control import CostSpec, FbsConfig, ModelParams, SocialCost, SvirState, TimeGrid, solve

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "data"
CONFIGS = ROOT / "configs"

BASE_X0 = SvirState(0.85, 0.0, 0.15, 0.0)
BASE_GRID = TimeGrid(0.0, 240.0, 2400)
ENDEMIC_GRID = TimeGrid(0.0, 720.0, 7200)


@pytest.fixture(scope="session")
def params():
    return ModelParams()


@pytest.fixture(scope="session")
def endemic_params():
    return ModelParams(mu=0.005)


def spec_for(family, value):
    return CostSpec(SocialCost(family, value))


@pytest.fixture(scope="session")
def quad_spec():
    return spec_for("quadratic", 0.02)


@pytest.fixture(scope="session")
def exp_spec():
    return spec_for("exponential", 0.06)


@pytest.fixture(scope="session")
def lin_spec():
    return spec_for("linear", 0.05)


@pytest.fixture(scope="session")
def quad_solution(params, quad_spec):
    return solve(params, BASE_X0, quad_spec, FbsConfig(grid=BASE_GRID))


@pytest.fixture(scope="session")
def exp_solution(params, exp_spec):
    return solve(params, BASE_X0, exp_spec, FbsConfig(grid=BASE_GRID))


@pytest.fixture(scope="session")
def lin_solution(params, lin_spec):
    return solve(params, BASE_X0, lin_spec, FbsConfig(grid=BASE_GRID))


@pytest.fixture(scope="session")
def endemic_solution(endemic_params, quad_spec):
    return solve(endemic_params, BASE_X0, quad_spec, FbsConfig(grid=ENDEMIC_GRID))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
