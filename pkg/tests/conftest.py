from __future__ import annotations

import pytest

from dynamics import GridSpec, find_steady_states, phi_curve
from primitives import Environment, ModelParams


@pytest.fixture(scope="session")
def params() -> ModelParams:
    return ModelParams()


@pytest.fixture(scope="session")
def grid() -> GridSpec:
    return GridSpec()


@pytest.fixture(scope="session")
def curves(params: ModelParams, grid: GridSpec) -> dict:
    return {env: phi_curve(env, 0.0, grid, params) for env in Environment}


@pytest.fixture(scope="session")
def states(params: ModelParams, grid: GridSpec, curves: dict) -> dict:
    return {
        env: find_steady_states(env, 0.0, grid, params, curve=curves[env])
        for env in Environment
    }
