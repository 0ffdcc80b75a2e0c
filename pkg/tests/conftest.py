import numpy as np
import pytest

from vlasov_char.well_solutions import ThetaSolution, WellParams

# criterion number -> (description, passed, detail); filled by test_acceptance
ACCEPTANCE_RESULTS: dict = {}


@pytest.fixture
def params():
    return WellParams(m=1.0, hbar=1.0, a=0.5)


@pytest.fixture(scope="session")
def comb():
    """The comb solution at mu=1, beta=0.01, a=0.5, m=hbar=1."""
    return ThetaSolution.create(mu=1, beta=0.01)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        desc, ok, detail = ACCEPTANCE_RESULTS[num]
        terminalreporter.write_line(f"criterion {num:2d} {'PASS' if ok else 'FAIL'}  {desc}  ({detail})")
