import numpy as np
import pytest

from bulksurf.coeffs import ProblemParams
from bulksurf.geometry import FourierShape, build_mesh


@pytest.fixture(scope="session")
def unit_mesh():
    return build_mesh(FourierShape.circle(1.0), 0.11)


@pytest.fixture(scope="session")
def ref_params():
    return ProblemParams(d=1.0, D=1.5, f_lin=0.5, g_lin=0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
