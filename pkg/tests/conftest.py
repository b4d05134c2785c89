import numpy as np
import pytest

from hypokfem import HParams, build_space, build_structured

# acceptance verdicts collected by test_acceptance.py, echoed in the summary
VERDICTS = []


@pytest.fixture
def params():
    return HParams()


@pytest.fixture(scope="session")
def space8():
    return build_space(build_structured(8, 8), 2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for v in sorted(VERDICTS, key=lambda v: v.number):
        terminalreporter.write_line(v.line())
