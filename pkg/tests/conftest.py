import numpy as np
import pytest

from coxkernel import kernels, rate, simulate

TWO_STATE = simulate.TwoStateModel(k1=2.0, k2=5.0, lam_a=1000.0, lam_b=400.0)


def two_state_data(seed, T=500.0):
    path_seed, arrival_seed = np.random.SeedSequence(seed).spawn(2)
    path = simulate.simulate_two_state_path(TWO_STATE, T, path_seed)
    data = simulate.simulate_arrivals(path, arrival_seed)
    return path, data


@pytest.fixture(scope="session")
def epan():
    return kernels.get_kernel("epanechnikov")


@pytest.fixture(scope="session")
def table1_run():
    """One two-state realization shared by rate/ACF tests."""
    return two_state_data(seed=100)


@pytest.fixture(scope="session")
def table1_selection(table1_run, epan):
    _, data = table1_run
    return rate.optimal_bandwidth(data, epan, rho=5.0)
