import math

import pytest

from shortvol import CevSpec, Market, make_cev_model


@pytest.fixture
def sqrt_spec():
    return CevSpec(0.14, -0.5)


@pytest.fixture
def sqrt_model(sqrt_spec):
    return make_cev_model(sqrt_spec)


def strike(s0, k):
    return s0 * math.exp(k)


def fig_market(rho=0.1, T=1.0):
    return Market.from_rho(2.0, rho, T)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
