"""Shared fixtures: built-in models and their safe step bounds."""

import numpy as np
import pytest
from hypothesis import settings

from nsfd.integrator import step_bound
from nsfd.models import make_host_vector, make_logistic, make_si

settings.register_profile("nsfd", deadline=None)
settings.load_profile("nsfd")


@pytest.fixture(scope="session")
def logistic():
    return make_logistic()


@pytest.fixture(scope="session")
def si():
    return make_si()


@pytest.fixture(scope="session")
def host_vector():
    return make_host_vector()


@pytest.fixture(scope="session")
def all_models(logistic, si, host_vector):
    return (logistic, si, host_vector)


@pytest.fixture(scope="session")
def h_bars(all_models):
    return {m.name: step_bound(m).h_bar for m in all_models}


@pytest.fixture
def rng():
    # fresh generator per test so draws never depend on test order
    return np.random.default_rng(20240817)
