import numpy as np
import pytest

from pnvcauchy.chart import build_chart, make_spec
from pnvcauchy.initial_data import gen_circle_codazzi, gen_conformal_torus, gen_flat

TWO_PI = 2.0 * np.pi
TORUS_SIGMA = "0.2*cos(x1)*cos(x2)"


def torus_chart(n):
    return build_chart(make_spec([(0.0, TWO_PI)] * 2, n, "periodic"))


def circle_chart(n):
    return build_chart(make_spec([(0.0, TWO_PI)], n, "periodic"))


def box_chart(n, dim=2):
    return build_chart(make_spec([(-1.0, 1.0)] * dim, n, "open"))


@pytest.fixture(scope="session")
def torus32():
    return gen_conformal_torus(torus_chart(32), TORUS_SIGMA)


@pytest.fixture(scope="session")
def torus64():
    return gen_conformal_torus(torus_chart(64), TORUS_SIGMA)


@pytest.fixture(scope="session")
def circle64():
    return gen_circle_codazzi(circle_chart(64), "0.3*sin(x1)")


@pytest.fixture
def flat16():
    return gen_flat(torus_chart(16), [0.6, 0.8])


# one summary line per acceptance criterion, collected by tests/test_acceptance.py
CRITERIA_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(CRITERIA_LINES):
            terminalreporter.write_line(CRITERIA_LINES[k])
