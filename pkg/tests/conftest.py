import numpy as np
import pytest

from relaxman import builtin_model, builtin_reduced, reduce, spectral_factorize


@pytest.fixture(scope="session")
def toy3():
    return builtin_model("toy3")


@pytest.fixture(scope="session")
def toy3_reduced(toy3):
    return reduce(toy3, "plus")


@pytest.fixture(scope="session")
def dv_bgk():
    return builtin_model("dv-bgk")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def scalar():
    r = builtin_reduced("scalar")
    return r, spectral_factorize(r)


@pytest.fixture(scope="session")
def saddle():
    r = builtin_reduced("saddle")
    return r, spectral_factorize(r)


@pytest.fixture(scope="session")
def coupled_saddle():
    r = builtin_reduced("coupled-saddle")
    return r, spectral_factorize(r)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
