import warnings

import pytest

from pushguide.config import load_config
from pushguide.errors import ModelValidityWarning
from pushguide.transport import simulate


def _load(name, **kw):
    with warnings.catch_warnings():
        # the bundled Rayleigh lengths are measured, not ideal-Gaussian
        warnings.simplefilter("ignore", ModelValidityWarning)
        return load_config(name, **kw)


@pytest.fixture(scope="session")
def load():
    return _load


@pytest.fixture(scope="session")
def rb():
    return _load("rb_paper")


@pytest.fixture(scope="session")
def cs():
    return _load("cs_paper")


@pytest.fixture(scope="session")
def rb_sim(rb):
    return simulate(rb.beam, rb.species, rb.geometry, rb.T0, rb.options)


@pytest.fixture(scope="session")
def cs_sim(cs):
    return simulate(cs.beam, cs.species, cs.geometry, cs.T0, cs.options)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
