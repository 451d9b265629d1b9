"""Shared fixtures: one default system per session (construction is cheap,
but the numba coverage kernel warms up on first use and several suites
reuse the same instance)."""

import numpy as np
import pytest

from torusdyn.endo import Params, System, build_system, default_params


@pytest.fixture(scope="session")
def P() -> Params:
    return default_params()


@pytest.fixture(scope="session")
def system(P) -> System:
    return build_system(P)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)
